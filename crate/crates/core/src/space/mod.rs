//! Continuous Lagrange spaces of degree 1 or 2, scalar or vector valued.
//!
//! Nodes are numbered vertices first, then (degree 2) edges:
//! node `n_vertices + e` sits on edge `e`. Vector spaces interleave
//! components, so DOF `2 * node + component`.

pub mod cell;
pub mod reference;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Domain, TriangleMesh};
use crate::{Mat2, Point};

pub use cell::{map_point, CellValues, PointMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    /// Full H1 space.
    None,
    /// All DOFs on the boundary vanish (`H^1_0`).
    ZeroTrace,
    /// Tangential component vanishes on the boundary. Only for vector spaces on
    /// polygons with axis-aligned boundary edges.
    ZeroTangential,
}

#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Arc<TriangleMesh>,
    degree: usize,
    value_dim: usize,
    constraint: Constraint,
    n_nodes: usize,
    constrained: Vec<bool>,
}

pub fn build_space(
    mesh: Arc<TriangleMesh>,
    degree: usize,
    value_dim: usize,
    constraint: Constraint,
) -> Result<FeSpace> {
    FeSpace::new(mesh, degree, value_dim, constraint)
}

impl FeSpace {
    pub fn new(mesh: Arc<TriangleMesh>, degree: usize, value_dim: usize, constraint: Constraint) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        if !(1..=2).contains(&value_dim) {
            return Err(Error::InvalidInput(format!("value dimension must be 1 or 2, got {value_dim}")));
        }
        let n_nodes = mesh.n_vertices() + if degree == 2 { mesh.n_edges() } else { 0 };
        let mut constrained = vec![false; n_nodes * value_dim];
        match constraint {
            Constraint::None => {}
            Constraint::ZeroTrace => {
                for &e in mesh.boundary_edges() {
                    for node in edge_nodes(&mesh, degree, e) {
                        for c in 0..value_dim {
                            constrained[node * value_dim + c] = true;
                        }
                    }
                }
            }
            Constraint::ZeroTangential => {
                if value_dim != 2 {
                    return Err(Error::UnsupportedConstraint(
                        "tangential constraint needs a vector space".into(),
                    ));
                }
                if *mesh.domain() != Domain::Polygon {
                    return Err(Error::UnsupportedConstraint(
                        "tangential constraint is only available on polygons".into(),
                    ));
                }
                for &e in mesh.boundary_edges() {
                    let [a, b] = mesh.edges()[e];
                    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                    let (dx, dy) = ((pb[0] - pa[0]).abs(), (pb[1] - pa[1]).abs());
                    let len = dx.hypot(dy);
                    // the tangent is e_x on horizontal edges and e_y on vertical ones
                    let component = if dy <= 1e-12 * len {
                        0
                    } else if dx <= 1e-12 * len {
                        1
                    } else {
                        return Err(Error::UnsupportedConstraint(format!(
                            "boundary edge {e} is not axis-aligned"
                        )));
                    };
                    for node in edge_nodes(&mesh, degree, e) {
                        constrained[2 * node + component] = true;
                    }
                }
            }
        }
        Ok(Self {
            mesh,
            degree,
            value_dim,
            constraint,
            n_nodes,
            constrained,
        })
    }

    pub fn mesh(&self) -> &Arc<TriangleMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes * self.value_dim
    }

    pub fn n_basis(&self) -> usize {
        reference::n_nodes(self.degree)
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn constrained_dofs(&self) -> Vec<usize> {
        (0..self.n_dofs()).filter(|&d| self.constrained[d]).collect()
    }

    pub fn n_free(&self) -> usize {
        self.constrained.iter().filter(|&&c| !c).count()
    }

    /// Global node numbers of the local nodes of a cell.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 6] {
        let c = self.mesh.cells()[cell];
        let mut nodes = [0; 6];
        nodes[..3].copy_from_slice(&c);
        if self.degree == 2 {
            let nv = self.mesh.n_vertices();
            for (i, e) in self.mesh.cell_edges(cell).into_iter().enumerate() {
                nodes[3 + i] = nv + e;
            }
        }
        nodes
    }

    /// Physical location of a node; edge nodes follow the curved boundary on
    /// order-2 meshes.
    pub fn node_point(&self, node: usize) -> Point {
        let nv = self.mesh.n_vertices();
        if node < nv {
            self.mesh.vertices()[node]
        } else {
            self.mesh.edge_node(node - nv)
        }
    }
}

fn edge_nodes(mesh: &TriangleMesh, degree: usize, e: usize) -> Vec<usize> {
    let [a, b] = mesh.edges()[e];
    let mut nodes = vec![a, b];
    if degree == 2 {
        nodes.push(mesh.n_vertices() + e);
    }
    nodes
}

/// A finite element function: a space and one coefficient per DOF.
#[derive(Clone, Debug)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.n_dofs();
        Self {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_coeffs(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                space.n_dofs(),
                coeffs.len()
            )));
        }
        if let Some(d) = (0..coeffs.len()).find(|&d| space.is_constrained(d) && coeffs[d] != 0.0) {
            return Err(Error::InvalidInput(format!("constrained DOF {d} is non-zero")));
        }
        Ok(Self { space, coeffs })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficients of the local nodes of a cell, one array per component.
    pub fn local_coeffs(&self, cell: usize) -> [[f64; 6]; 2] {
        let nodes = self.space.cell_nodes(cell);
        let dim = self.space.value_dim();
        let mut out = [[0.0; 6]; 2];
        for i in 0..self.space.n_basis() {
            for c in 0..dim {
                out[c][i] = self.coeffs[nodes[i] * dim + c];
            }
        }
        out
    }

    /// Value and physical gradient of a scalar function at reference points of a cell.
    pub fn evaluate_scalar(&self, cell: usize, ref_points: &[(f64, f64)]) -> Result<Vec<(f64, [f64; 2])>> {
        if self.space.value_dim() != 1 {
            return Err(Error::InvalidInput("evaluate_scalar on a vector space".into()));
        }
        self.evaluate(cell, ref_points)
            .map(|v| v.into_iter().map(|(val, grad)| (val[0], grad[0])).collect())
    }

    /// Value and Jacobian (`[i][j] = d_j v_i`) of a vector function at reference points.
    pub fn evaluate_vector(&self, cell: usize, ref_points: &[(f64, f64)]) -> Result<Vec<([f64; 2], Mat2)>> {
        if self.space.value_dim() != 2 {
            return Err(Error::InvalidInput("evaluate_vector on a scalar space".into()));
        }
        self.evaluate(cell, ref_points)
    }

    /// Component values and gradients; unused components are zero for scalar spaces.
    pub fn evaluate(&self, cell: usize, ref_points: &[(f64, f64)]) -> Result<Vec<([f64; 2], Mat2)>> {
        if cell >= self.space.mesh().n_cells() {
            return Err(Error::InvalidInput(format!("cell {cell} out of range")));
        }
        let local = self.local_coeffs(cell);
        let n = self.space.n_basis();
        ref_points
            .iter()
            .map(|&(xi, eta)| {
                if !reference::inside_reference(xi, eta) {
                    return Err(Error::OutsideReference(xi, eta));
                }
                let map = map_point(self.space.mesh(), cell, xi, eta)?;
                let (vals, ref_grads) = reference::shape(self.space.degree(), xi, eta);
                let mut value = [0.0; 2];
                let mut grad = [[0.0; 2]; 2];
                for i in 0..n {
                    let g = cell::physical_gradient(&map.inv_t, ref_grads[i]);
                    for c in 0..self.space.value_dim() {
                        value[c] += local[c][i] * vals[i];
                        grad[c][0] += local[c][i] * g[0];
                        grad[c][1] += local[c][i] * g[1];
                    }
                }
                Ok((value, grad))
            })
            .collect()
    }
}

/// Nodal interpolant of a scalar field. Constrained DOFs are reset to zero.
pub fn interpolate(space: Arc<FeSpace>, field: impl Fn(Point) -> f64) -> Result<FeFunction> {
    if space.value_dim() != 1 {
        return Err(Error::InvalidInput("interpolate needs a scalar space".into()));
    }
    interpolate_components(space, |p| [field(p), 0.0])
}

/// Nodal interpolant of a vector field. Constrained DOFs are reset to zero.
pub fn interpolate_vector(space: Arc<FeSpace>, field: impl Fn(Point) -> [f64; 2]) -> Result<FeFunction> {
    if space.value_dim() != 2 {
        return Err(Error::InvalidInput("interpolate_vector needs a vector space".into()));
    }
    interpolate_components(space, field)
}

fn interpolate_components(space: Arc<FeSpace>, field: impl Fn(Point) -> [f64; 2]) -> Result<FeFunction> {
    let dim = space.value_dim();
    let mut coeffs = vec![0.0; space.n_dofs()];
    for node in 0..space.n_nodes() {
        let p = space.node_point(node);
        let v = field(p);
        for c in 0..dim {
            if !v[c].is_finite() {
                return Err(Error::NonFinite { x: p[0], y: p[1] });
            }
            let dof = node * dim + c;
            coeffs[dof] = if space.is_constrained(dof) { 0.0 } else { v[c] };
        }
    }
    Ok(FeFunction { space, coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_disk_mesh, generate_rectangle_mesh, refine_uniform};

    fn disk(res: usize, order: u8) -> Arc<TriangleMesh> {
        Arc::new(generate_disk_mesh([0.0, 0.0], 1.0, res, order).unwrap())
    }

    #[test]
    fn dof_counts() {
        let mesh = disk(3, 1);
        let p1 = FeSpace::new(mesh.clone(), 1, 1, Constraint::None).unwrap();
        assert_eq!(p1.n_dofs(), mesh.n_vertices());
        let p2 = FeSpace::new(mesh.clone(), 2, 1, Constraint::None).unwrap();
        assert_eq!(p2.n_dofs(), mesh.n_vertices() + mesh.n_edges());
        let v2 = FeSpace::new(mesh.clone(), 2, 2, Constraint::None).unwrap();
        assert_eq!(v2.n_dofs(), 2 * p2.n_dofs());
        let z1 = FeSpace::new(mesh.clone(), 1, 1, Constraint::ZeroTrace).unwrap();
        assert_eq!(z1.constrained_dofs().len(), mesh.n_boundary_vertices());
        let z2 = FeSpace::new(mesh.clone(), 2, 1, Constraint::ZeroTrace).unwrap();
        assert_eq!(
            z2.constrained_dofs().len(),
            mesh.n_boundary_vertices() + mesh.boundary_edges().len()
        );
    }

    #[test]
    fn unsupported_degree() {
        assert!(matches!(
            FeSpace::new(disk(1, 1), 3, 1, Constraint::None),
            Err(Error::UnsupportedDegree(3))
        ));
    }

    #[test]
    fn tangential_constraint_on_square() {
        let mesh = Arc::new(generate_rectangle_mesh([0.0, 0.0], [1.0, 1.0], 2, 2).unwrap());
        let w = FeSpace::new(mesh.clone(), 1, 2, Constraint::ZeroTangential).unwrap();
        // 8 boundary vertices, one tangential component each, corners lose both
        assert_eq!(w.constrained_dofs().len(), 8 + 4);
        assert!(FeSpace::new(disk(2, 1), 1, 2, Constraint::ZeroTangential).is_err());
        assert!(FeSpace::new(mesh, 1, 1, Constraint::ZeroTangential).is_err());
    }

    #[test]
    fn interpolation_reproduces_linears() {
        let space = Arc::new(FeSpace::new(disk(3, 1), 1, 1, Constraint::None).unwrap());
        let ones = interpolate(space.clone(), |_| 1.0).unwrap();
        assert!(ones.coeffs().iter().all(|&c| c == 1.0));
        let f = interpolate(space.clone(), |p| p[0]).unwrap();
        for cell in [0, 5, 17] {
            let pts = [(0.2, 0.3), (0.5, 0.1), (1.0 / 3.0, 1.0 / 3.0)];
            let vals = f.evaluate_scalar(cell, &pts).unwrap();
            for (&(xi, eta), (v, g)) in pts.iter().zip(vals) {
                let x = map_point(space.mesh(), cell, xi, eta).unwrap().x;
                assert!((v - x[0]).abs() < 1e-14);
                assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn centroid_gradient_of_x2() {
        let space = Arc::new(FeSpace::new(disk(2, 2), 2, 1, Constraint::None).unwrap());
        let f = interpolate(space.clone(), |p| p[1]).unwrap();
        for cell in 0..space.mesh().n_cells() {
            let (_, g) = f.evaluate_scalar(cell, &[(1.0 / 3.0, 1.0 / 3.0)]).unwrap()[0];
            assert!(g[0].abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn p2_reproduces_quadratic_gradient() {
        let mesh = Arc::new(generate_rectangle_mesh([-1.0, -1.0], [1.0, 1.0], 3, 3).unwrap());
        let space = Arc::new(FeSpace::new(mesh, 2, 1, Constraint::None).unwrap());
        let f = interpolate(space.clone(), |p| p[0] * p[0]).unwrap();
        for cell in 0..space.mesh().n_cells() {
            let pts = [(0.1, 0.7), (0.25, 0.25)];
            for (&(xi, eta), (_, g)) in pts.iter().zip(f.evaluate_scalar(cell, &pts).unwrap()) {
                let x = map_point(space.mesh(), cell, xi, eta).unwrap().x;
                assert!((g[0] - 2.0 * x[0]).abs() < 1e-12 && g[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_points_outside_reference() {
        let space = Arc::new(FeSpace::new(disk(1, 1), 1, 1, Constraint::None).unwrap());
        let f = FeFunction::zeros(space);
        assert!(matches!(f.evaluate_scalar(0, &[(0.8, 0.5)]), Err(Error::OutsideReference(..))));
    }

    #[test]
    fn rejects_non_finite_fields() {
        let space = Arc::new(FeSpace::new(disk(1, 1), 1, 1, Constraint::None).unwrap());
        assert!(matches!(interpolate(space, |_| f64::NAN), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn zero_trace_interpolant_vanishes_on_boundary() {
        let space = Arc::new(FeSpace::new(disk(2, 2), 2, 1, Constraint::ZeroTrace).unwrap());
        let f = interpolate(space.clone(), |_| 3.0).unwrap();
        for d in space.constrained_dofs() {
            assert_eq!(f.coeffs()[d], 0.0);
        }
        assert!(FeFunction::from_coeffs(space.clone(), vec![1.0; space.n_dofs()]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences_on_curved_cells() {
        let space = Arc::new(FeSpace::new(disk(2, 2), 2, 1, Constraint::None).unwrap());
        let f = interpolate(space.clone(), |p| (2.0 * p[0]).sin() * (p[1] + 0.3).exp()).unwrap();
        let mesh = space.mesh();
        let h = 1e-6;
        for cell in (0..mesh.n_cells()).filter(|&k| mesh.is_curved(k)).take(6) {
            let (xi, eta) = (0.3, 0.4);
            let m = map_point(mesh, cell, xi, eta).unwrap();
            let (_, g) = f.evaluate_scalar(cell, &[(xi, eta)]).unwrap()[0];
            // finite differences in reference coordinates, then chain rule J^T grad = d/dxi
            let v = |a: f64, b: f64| f.evaluate_scalar(cell, &[(a, b)]).unwrap()[0].0;
            let dxi = (v(xi + h, eta) - v(xi - h, eta)) / (2.0 * h);
            let deta = (v(xi, eta + h) - v(xi, eta - h)) / (2.0 * h);
            let phys = cell::physical_gradient(&m.inv_t, [dxi, deta]);
            assert!((phys[0] - g[0]).abs() < 1e-6 && (phys[1] - g[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn interpolation_error_rate_for_x_squared() {
        let mut mesh = generate_disk_mesh([0.0, 0.0], 1.0, 2, 1).unwrap();
        let mut errors = Vec::new();
        let rule = crate::mesh::quadrature(6).unwrap();
        for _ in 0..4 {
            let m = Arc::new(mesh.clone());
            let space = Arc::new(FeSpace::new(m.clone(), 1, 1, Constraint::None).unwrap());
            let f = interpolate(space, |p| p[0] * p[0]).unwrap();
            let mut cv = CellValues::new(1, &rule);
            let mut err = 0.0;
            for k in 0..m.n_cells() {
                cv.reinit(&m, k).unwrap();
                let local = f.local_coeffs(k);
                for q in 0..cv.n_points() {
                    let v: f64 = (0..3).map(|i| local[0][i] * cv.values(q)[i]).sum();
                    err += cv.jxw[q] * (v - cv.points[q][0].powi(2)).powi(2);
                }
            }
            errors.push((m.h(), err.sqrt()));
            mesh = refine_uniform(&mesh).unwrap();
        }
        let (h0, e0) = errors[2];
        let (h1, e1) = errors[3];
        let rate = (e0 / e1).ln() / (h0 / h1).ln();
        assert!((rate - 2.0).abs() < 0.1, "rate {rate}");
    }
}
