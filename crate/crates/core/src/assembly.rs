//! Assembly of the least-squares system
//!
//! ```text
//! a(u, g; v, h) = (grad u - g, grad v - h) + (rot g, rot h) + (M(u, g), M(v, h))
//! l(v, h)       = (f, M(v, h))
//! M(u, g)       = A:Dg + b.(theta g + (1 - theta) grad u) - c u
//! ```
//!
//! over `V_u x V_g`, where `V_u` carries the zero-trace constraint.
//!
//! Cells are processed in parallel and their contributions concatenated in
//! cell order; [`CsrMatrix::from_triplets`] then sums duplicates in that
//! order, so the assembled system does not depend on the thread count.

use std::sync::Arc;

use rayon::prelude::*;

use crate::cordes::CoefficientSet;
use crate::error::{Error, Result};
use crate::linsolve::{solve, CsrMatrix, LinearSolver, SolveStats};
use crate::mesh::quadrature;
use crate::space::reference::MAX_NODES;
use crate::space::{CellValues, FeFunction, FeSpace};
use crate::{Mat2, Point};

/// Coefficients of the linear operator at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointCoefficients {
    pub a: Mat2,
    pub b: [f64; 2],
    pub c: f64,
    pub f: f64,
}

/// Where the operator coefficients come from during assembly.
#[derive(Clone, Debug)]
pub enum CoefficientField {
    /// Evaluate a coefficient model at a fixed control.
    Model { coefficients: CoefficientSet, alpha: f64 },
    /// Precomputed values per cell and quadrature point of the context's rule.
    Frozen(Arc<Vec<Vec<PointCoefficients>>>),
}

/// `theta`, the coefficient source and the quadrature degree used for every integral.
#[derive(Clone, Debug)]
pub struct ThetaOperatorContext {
    theta: f64,
    field: CoefficientField,
    quad_degree: Option<usize>,
}

impl ThetaOperatorContext {
    pub fn new(theta: f64, field: CoefficientField) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidInput(format!("theta must lie in [0, 1], got {theta}")));
        }
        Ok(Self {
            theta,
            field,
            quad_degree: None,
        })
    }

    pub fn from_coefficients(theta: f64, coefficients: CoefficientSet) -> Result<Self> {
        Self::new(theta, CoefficientField::Model { coefficients, alpha: 0.0 })
    }

    pub fn with_quad_degree(mut self, degree: usize) -> Self {
        self.quad_degree = Some(degree);
        self
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn field(&self) -> &CoefficientField {
        &self.field
    }

    /// Explicit degree, or `2k + 2` for spaces of degree `k`.
    pub fn quad_degree(&self, space_degree: usize) -> usize {
        self.quad_degree.unwrap_or(2 * space_degree + 2)
    }

    pub(crate) fn coefficients(&self, cell: usize, q: usize, x: Point) -> PointCoefficients {
        match &self.field {
            CoefficientField::Model { coefficients, alpha } => coefficients.eval(x, *alpha),
            CoefficientField::Frozen(values) => values[cell][q],
        }
    }

    fn check_field(&self, n_cells: usize, n_points: usize) -> Result<()> {
        if let CoefficientField::Frozen(values) = &self.field {
            if values.len() != n_cells || values.iter().any(|v| v.len() != n_points) {
                return Err(Error::InvalidInput(
                    "frozen coefficient field does not match the mesh and quadrature rule".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn m_theta(&self, p: &PointCoefficients, phi: f64, grad_phi: [f64; 2], psi: [f64; 2], dpsi: &Mat2) -> f64 {
        apply_m_theta(self.theta, p, phi, grad_phi, psi, dpsi)
    }
}

/// `A:Dpsi + b.(theta psi + (1 - theta) grad phi) - c phi`, with `dpsi[i][j] = d_j psi_i`.
pub fn apply_m_theta(theta: f64, p: &PointCoefficients, phi: f64, grad_phi: [f64; 2], psi: [f64; 2], dpsi: &Mat2) -> f64 {
    let mut adpsi = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            adpsi += p.a[i][j] * dpsi[i][j];
        }
    }
    let drift: f64 = (0..2).map(|i| p.b[i] * (theta * psi[i] + (1.0 - theta) * grad_phi[i])).sum();
    adpsi + drift - p.c * phi
}

/// Free-DOF system of the pair `(u, g)`: the `u` block first, then the `g`
/// block with components interleaved, constrained DOFs removed.
#[derive(Clone, Debug)]
pub struct SparseSymSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    space_u: Arc<FeSpace>,
    space_g: Arc<FeSpace>,
    /// Free index to full pair index.
    free_to_full: Vec<usize>,
    n_u_free: usize,
}

impl SparseSymSystem {
    pub fn n(&self) -> usize {
        self.rhs.len()
    }

    pub fn n_u_free(&self) -> usize {
        self.n_u_free
    }

    pub fn n_g_free(&self) -> usize {
        self.n() - self.n_u_free
    }

    pub fn space_u(&self) -> &Arc<FeSpace> {
        &self.space_u
    }

    pub fn space_g(&self) -> &Arc<FeSpace> {
        &self.space_g
    }

    /// Scatters a free-DOF vector into the pair of functions.
    pub fn split(&self, x: &[f64]) -> Result<(FeFunction, FeFunction)> {
        if x.len() != self.n() {
            return Err(Error::InvalidInput(format!("expected {} values, got {}", self.n(), x.len())));
        }
        let nu = self.space_u.n_dofs();
        let mut cu = vec![0.0; nu];
        let mut cg = vec![0.0; self.space_g.n_dofs()];
        for (&full, &v) in self.free_to_full.iter().zip(x) {
            if full < nu {
                cu[full] = v;
            } else {
                cg[full - nu] = v;
            }
        }
        Ok((
            FeFunction::from_coeffs(self.space_u.clone(), cu)?,
            FeFunction::from_coeffs(self.space_g.clone(), cg)?,
        ))
    }

    /// Gathers the free DOFs of a pair.
    pub fn gather(&self, u: &FeFunction, g: &FeFunction) -> Vec<f64> {
        let nu = self.space_u.n_dofs();
        self.free_to_full
            .iter()
            .map(|&full| if full < nu { u.coeffs()[full] } else { g.coeffs()[full - nu] })
            .collect()
    }

    pub fn solve(&self, solver: &LinearSolver) -> Result<(FeFunction, FeFunction, SolveStats)> {
        let (x, stats) = solve(&self.matrix, &self.rhs, solver)?;
        let (u, g) = self.split(&x)?;
        Ok((u, g, stats))
    }

    /// `|K x - F| / |F|` for a candidate solution.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let kx = self.matrix.matvec(x);
        let r: f64 = kx.iter().zip(&self.rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = self.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nb == 0.0 {
            r
        } else {
            r / nb
        }
    }
}

pub(crate) fn check_pair_spaces(space_u: &FeSpace, space_g: &FeSpace) -> Result<()> {
    if !Arc::ptr_eq(space_u.mesh(), space_g.mesh()) {
        return Err(Error::InvalidInput("u and g spaces must share one mesh".into()));
    }
    if space_u.degree() != space_g.degree() {
        return Err(Error::InvalidInput("u and g spaces must have the same degree".into()));
    }
    if space_u.value_dim() != 1 || space_g.value_dim() != 2 {
        return Err(Error::InvalidInput("expected a scalar u space and a vector g space".into()));
    }
    Ok(())
}

// per basis function: the three residual components [grad - g (2), rot, M]
type Residual = [f64; 4];

fn basis_residuals(ctx: &ThetaOperatorContext, cv: &CellValues, q: usize, p: &PointCoefficients, out: &mut [Residual]) {
    let nb = cv.n_basis();
    let theta = ctx.theta;
    let phi = cv.values(q);
    let grad = &cv.grads[q];
    for i in 0..nb {
        let g = grad[i];
        out[i] = [g[0], g[1], 0.0, (1.0 - theta) * (p.b[0] * g[0] + p.b[1] * g[1]) - p.c * phi[i]];
        for c in 0..2 {
            let mut r1 = [0.0; 2];
            r1[c] = -phi[i];
            let rot = if c == 0 { -g[1] } else { g[0] };
            let m = p.a[c][0] * g[0] + p.a[c][1] * g[1] + theta * p.b[c] * phi[i];
            out[nb + 2 * i + c] = [r1[0], r1[1], rot, m];
        }
    }
}

/// Assembles the system of the pair `(space_u, space_g)`. The load is taken
/// from the `f` component of the coefficients.
pub fn assemble_system(space_u: &Arc<FeSpace>, space_g: &Arc<FeSpace>, ctx: &ThetaOperatorContext) -> Result<SparseSymSystem> {
    check_pair_spaces(space_u, space_g)?;
    let mesh = space_u.mesh();
    let degree = space_u.degree();
    let qdeg = ctx.quad_degree(degree);
    if qdeg < 2 * degree + 2 {
        log::warn!("quadrature degree {qdeg} is below 2k + 2 = {}", 2 * degree + 2);
    }
    let rule = quadrature(qdeg)?;
    ctx.check_field(mesh.n_cells(), rule.len())?;

    let nu = space_u.n_dofs();
    let mut full_to_free = vec![usize::MAX; nu + space_g.n_dofs()];
    let mut free_to_full = Vec::new();
    for full in 0..full_to_free.len() {
        let constrained = if full < nu {
            space_u.is_constrained(full)
        } else {
            space_g.is_constrained(full - nu)
        };
        if !constrained {
            full_to_free[full] = free_to_full.len();
            free_to_full.push(full);
        }
    }
    let n_u_free = free_to_full.iter().filter(|&&f| f < nu).count();
    let n = free_to_full.len();

    let nb = space_u.n_basis();
    let nloc = 3 * nb;
    let per_cell: Vec<(Vec<(usize, usize, f64)>, Vec<(usize, f64)>)> = (0..mesh.n_cells())
        .into_par_iter()
        .map_init(
            || CellValues::new(degree, &rule),
            |cv, k| -> Result<_> {
                cv.reinit(mesh, k)?;
                let nodes = space_u.cell_nodes(k);
                let mut dofs = [usize::MAX; 3 * MAX_NODES];
                for i in 0..nb {
                    dofs[i] = full_to_free[nodes[i]];
                    for c in 0..2 {
                        dofs[nb + 2 * i + c] = full_to_free[nu + 2 * nodes[i] + c];
                    }
                }
                let mut kloc = [[0.0; 3 * MAX_NODES]; 3 * MAX_NODES];
                let mut floc = [0.0; 3 * MAX_NODES];
                let mut r = [[0.0; 4]; 3 * MAX_NODES];
                for q in 0..cv.n_points() {
                    let p = ctx.coefficients(k, q, cv.points[q]);
                    basis_residuals(ctx, cv, q, &p, &mut r);
                    let w = cv.jxw[q];
                    for i in 0..nloc {
                        let ri = r[i];
                        for j in i..nloc {
                            let rj = r[j];
                            kloc[i][j] += w * (ri[0] * rj[0] + ri[1] * rj[1] + ri[2] * rj[2] + ri[3] * rj[3]);
                        }
                        floc[i] += w * p.f * ri[3];
                    }
                }
                let mut triplets = Vec::with_capacity(nloc * nloc);
                let mut load = Vec::with_capacity(nloc);
                for i in 0..nloc {
                    if dofs[i] == usize::MAX {
                        continue;
                    }
                    load.push((dofs[i], floc[i]));
                    for j in 0..nloc {
                        if dofs[j] != usize::MAX {
                            let v = if i <= j { kloc[i][j] } else { kloc[j][i] };
                            triplets.push((dofs[i], dofs[j], v));
                        }
                    }
                }
                Ok((triplets, load))
            },
        )
        .collect::<Result<_>>()?;

    let mut rhs = vec![0.0; n];
    let mut triplets = Vec::with_capacity(per_cell.iter().map(|c| c.0.len()).sum());
    for (t, l) in per_cell {
        triplets.extend(t);
        for (i, v) in l {
            rhs[i] += v;
        }
    }
    let matrix = CsrMatrix::from_triplets(n, triplets);
    Ok(SparseSymSystem {
        matrix,
        rhs,
        space_u: space_u.clone(),
        space_g: space_g.clone(),
        free_to_full,
        n_u_free,
    })
}

/// Values of a pair at one quadrature point.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairPoint {
    pub x: Point,
    pub jxw: f64,
    pub u: f64,
    pub grad_u: [f64; 2],
    pub g: [f64; 2],
    /// `dg[i][j] = d_j g_i`.
    pub dg: Mat2,
}

impl PairPoint {
    pub fn rot_g(&self) -> f64 {
        self.dg[1][0] - self.dg[0][1]
    }
}

/// Evaluates `(u, g)` at every quadrature point of `cv` (already reinitialised).
pub(crate) fn pair_points(cv: &CellValues, u: &FeFunction, g: &FeFunction, out: &mut Vec<PairPoint>) {
    let k = cv.cell;
    let lu = u.local_coeffs(k)[0];
    let lg = g.local_coeffs(k);
    out.clear();
    for q in 0..cv.n_points() {
        let phi = cv.values(q);
        let grads = &cv.grads[q];
        let mut pp = PairPoint {
            x: cv.points[q],
            jxw: cv.jxw[q],
            u: 0.0,
            grad_u: [0.0; 2],
            g: [0.0; 2],
            dg: [[0.0; 2]; 2],
        };
        for i in 0..cv.n_basis() {
            pp.u += lu[i] * phi[i];
            for d in 0..2 {
                pp.grad_u[d] += lu[i] * grads[i][d];
                pp.g[d] += lg[d][i] * phi[i];
                for e in 0..2 {
                    pp.dg[d][e] += lg[d][i] * grads[i][e];
                }
            }
        }
        out.push(pp);
    }
}

/// The three squared residual terms at one point, times the quadrature weight.
pub(crate) fn residual_terms(ctx: &ThetaOperatorContext, pp: &PairPoint, p: &PointCoefficients) -> [f64; 3] {
    let d = [pp.grad_u[0] - pp.g[0], pp.grad_u[1] - pp.g[1]];
    let m = ctx.m_theta(p, pp.u, pp.grad_u, pp.g, &pp.dg) - p.f;
    [
        pp.jxw * (d[0] * d[0] + d[1] * d[1]),
        pp.jxw * pp.rot_g().powi(2),
        pp.jxw * m * m,
    ]
}

/// Per-cell values of the three residual integrals of a pair.
pub(crate) fn cell_residuals(ctx: &ThetaOperatorContext, u: &FeFunction, g: &FeFunction) -> Result<Vec<[f64; 3]>> {
    check_pair_spaces(u.space(), g.space())?;
    let mesh = u.space().mesh();
    let degree = u.space().degree();
    let rule = quadrature(ctx.quad_degree(degree))?;
    ctx.check_field(mesh.n_cells(), rule.len())?;
    (0..mesh.n_cells())
        .into_par_iter()
        .map_init(
            || (CellValues::new(degree, &rule), Vec::new()),
            |(cv, pts), k| {
                cv.reinit(mesh, k)?;
                pair_points(cv, u, g, pts);
                let mut acc = [0.0; 3];
                for (q, pp) in pts.iter().enumerate() {
                    let t = residual_terms(ctx, pp, &ctx.coefficients(k, q, pp.x));
                    for i in 0..3 {
                        acc[i] += t[i];
                    }
                }
                Ok(acc)
            },
        )
        .collect()
}

/// The functional `|grad u - g|^2 + |rot g|^2 + |M(u, g) - f|^2`, split into its terms.
pub fn energy_terms(ctx: &ThetaOperatorContext, u: &FeFunction, g: &FeFunction) -> Result<[f64; 3]> {
    let cells = cell_residuals(ctx, u, g)?;
    let mut terms = [0.0; 3];
    // term by term over all cells, unlike the per-cell indicator sums
    for (t, total) in terms.iter_mut().enumerate() {
        *total = cells.iter().map(|c| c[t]).sum();
    }
    Ok(terms)
}

pub fn assemble_energy(ctx: &ThetaOperatorContext, u: &FeFunction, g: &FeFunction) -> Result<f64> {
    Ok(energy_terms(ctx, u, g)?.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_disk_mesh, Domain, TriangleMesh};
    use crate::space::{interpolate_vector, Constraint};

    fn laplace() -> CoefficientSet {
        CoefficientSet::new(|_x: Point, _a: f64| PointCoefficients {
            a: [[1.0, 0.0], [0.0, 1.0]],
            b: [0.0; 2],
            c: 0.0,
            f: 1.0,
        })
    }

    fn spaces(mesh: TriangleMesh, degree: usize, cu: Constraint) -> (Arc<FeSpace>, Arc<FeSpace>) {
        let mesh = Arc::new(mesh);
        (
            Arc::new(FeSpace::new(mesh.clone(), degree, 1, cu).unwrap()),
            Arc::new(FeSpace::new(mesh, degree, 2, Constraint::None).unwrap()),
        )
    }

    #[test]
    fn m_theta_basics() {
        let p = PointCoefficients {
            a: [[1.0, 0.0], [0.0, 1.0]],
            ..Default::default()
        };
        assert_eq!(apply_m_theta(0.3, &p, 0.0, [0.0; 2], [0.0; 2], &[[0.0; 2]; 2]), 0.0);
        let dpsi = [[1.5, 2.0], [-3.0, 0.25]];
        for theta in [0.0, 0.5, 1.0] {
            assert_eq!(apply_m_theta(theta, &p, 2.0, [1.0, 1.0], [3.0, 4.0], &dpsi), 1.75);
        }
    }

    #[test]
    fn m_theta_blends_gradients() {
        let p = PointCoefficients {
            a: [[0.0; 2]; 2],
            b: [1.0, 2.0],
            c: 0.5,
            f: 0.0,
        };
        let v = apply_m_theta(0.25, &p, 2.0, [1.0, 0.0], [0.0, 1.0], &[[0.0; 2]; 2]);
        assert!((v - (0.25 * 2.0 + 0.75 * 1.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn system_is_exactly_symmetric() {
        let (su, sg) = spaces(generate_disk_mesh([0.0, 0.0], 1.0, 3, 2).unwrap(), 2, Constraint::ZeroTrace);
        let set = CoefficientSet::new(|x: Point, _a: f64| PointCoefficients {
            a: [[2.0 + x[0], 0.3 * x[1]], [0.3 * x[1], 1.5]],
            b: [x[1], 1.0],
            c: 1.0 + x[0] * x[0],
            f: x[0].sin(),
        });
        let ctx = ThetaOperatorContext::from_coefficients(0.5, set).unwrap();
        let sys = assemble_system(&su, &sg, &ctx).unwrap();
        assert_eq!(sys.matrix.max_asymmetry(), 0.0);
        assert_eq!(sys.n(), su.n_free() + sg.n_free());
        assert_eq!(sys.n_u_free(), su.n_free());
    }

    #[test]
    fn reference_triangle_stiffness_block() {
        let mesh = TriangleMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            Domain::Polygon,
            1,
        )
        .unwrap();
        let (su, sg) = spaces(mesh, 1, Constraint::None);
        let ctx = ThetaOperatorContext::from_coefficients(0.7, laplace()).unwrap();
        let sys = assemble_system(&su, &sg, &ctx).unwrap();
        let stiffness = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((sys.matrix.get(i, j) - stiffness[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let (su, sg) = spaces(generate_disk_mesh([0.0, 0.0], 1.0, 2, 1).unwrap(), 2, Constraint::ZeroTrace);
        // gradient of x^2 - 2 x y + y, exactly representable in P2
        let g = interpolate_vector(sg.clone(), |p| [2.0 * p[0] - 2.0 * p[1], -2.0 * p[0] + 1.0]).unwrap();
        let ctx = ThetaOperatorContext::from_coefficients(0.5, laplace()).unwrap();
        let terms = energy_terms(&ctx, &FeFunction::zeros(su), &g).unwrap();
        assert!(terms[1] < 1e-24, "{}", terms[1]);
    }

    #[test]
    fn zero_pair_with_zero_load_has_zero_energy() {
        let (su, sg) = spaces(generate_disk_mesh([0.0, 0.0], 1.0, 2, 1).unwrap(), 1, Constraint::ZeroTrace);
        let set = CoefficientSet::new(|_x: Point, _a: f64| PointCoefficients {
            a: [[1.0, 0.0], [0.0, 1.0]],
            ..Default::default()
        });
        let ctx = ThetaOperatorContext::from_coefficients(0.5, set).unwrap();
        let e = assemble_energy(&ctx, &FeFunction::zeros(su), &FeFunction::zeros(sg)).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn galerkin_orthogonality_and_energy_identity() {
        let (su, sg) = spaces(generate_disk_mesh([0.0, 0.0], 1.0, 3, 1).unwrap(), 1, Constraint::ZeroTrace);
        let ctx = ThetaOperatorContext::from_coefficients(0.5, laplace()).unwrap();
        let sys = assemble_system(&su, &sg, &ctx).unwrap();
        let (u, g, _) = sys.solve(&LinearSolver::DenseCholesky).unwrap();
        let x = sys.gather(&u, &g);
        assert!(sys.relative_residual(&x) < 1e-10);
        // E(x) = x.Kx - 2 F.x + |f|^2 and at the minimiser x.Kx = F.x
        let kx = sys.matrix.matvec(&x);
        let xkx: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
        let fx: f64 = x.iter().zip(&sys.rhs).map(|(a, b)| a * b).sum();
        let e = assemble_energy(&ctx, &u, &g).unwrap();
        let f_sq = su.mesh().area();
        assert!((e - (f_sq - fx)).abs() < 1e-10, "{e} vs {}", f_sq - fx);
        assert!((xkx - fx).abs() < 1e-10);
    }

    #[test]
    fn frozen_field_shape_is_checked() {
        let (su, sg) = spaces(generate_disk_mesh([0.0, 0.0], 1.0, 1, 1).unwrap(), 1, Constraint::ZeroTrace);
        let ctx = ThetaOperatorContext::new(0.5, CoefficientField::Frozen(Arc::new(vec![vec![]]))).unwrap();
        assert!(assemble_system(&su, &sg, &ctx).is_err());
        assert!(ThetaOperatorContext::new(1.5, CoefficientField::Frozen(Arc::new(vec![]))).is_err());
    }

    #[test]
    fn assembly_is_deterministic() {
        let (su, sg) = spaces(generate_disk_mesh([0.0, 0.0], 1.0, 4, 2).unwrap(), 2, Constraint::ZeroTrace);
        let ctx = ThetaOperatorContext::from_coefficients(0.5, laplace()).unwrap();
        let a = assemble_system(&su, &sg, &ctx).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| assemble_system(&su, &sg, &ctx).unwrap());
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.rhs, b.rhs);
    }
}
