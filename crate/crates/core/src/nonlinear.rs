//! Semismooth Newton iterations for the Monge-Ampere and HJB equations.
//!
//! Every step freezes the coefficients at the current iterate and solves one
//! linear least-squares problem. The Hessian of the iterate is replaced by
//! the symmetrised Jacobian of the recovered gradient, `H = (Dg + Dg^T) / 2`.
//!
//! * Monge-Ampere, `det D^2 u = f`: `Cof H : D^2 u_new = f + det H`
//!   (in 2D `Cof H : H = 2 det H`).
//! * HJB, `sup_a (L^a u - f^a) = 0`: pick a maximising control per quadrature
//!   point and solve `L^q u_new = f^q`. This is Howard's policy iteration, so
//!   an unchanged control field ends the iteration.

use std::sync::Arc;

use rayon::prelude::*;

use crate::analysis::y_norm;
use crate::assembly::{
    assemble_energy, assemble_system, pair_points, CoefficientField, PointCoefficients, ThetaOperatorContext,
};
use crate::cordes::{frozen_margin, CoefficientSet, CordesPolicy};
use crate::error::{Error, Result};
use crate::linsolve::LinearSolver;
use crate::mesh::quadrature;
use crate::space::{CellValues, FeFunction, FeSpace};
use crate::{Mat2, Point};

const PARABOLA_ROUNDS: usize = 6;

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Clone, Debug)]
pub struct NewtonConfig {
    /// Stop when the Y-norm of the increment drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub theta: f64,
    /// Size of the uniform control grid.
    pub alpha_samples: usize,
    /// Refine the best grid control locally at every quadrature point.
    pub refine_controls: bool,
    pub solver: LinearSolver,
    pub quad_degree: Option<usize>,
    pub cordes_policy: CordesPolicy,
    /// Return `Error::Diverged` on three consecutive increment increases;
    /// otherwise flag the trace and keep iterating.
    pub fail_on_divergence: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 8,
            theta: 0.5,
            alpha_samples: 64,
            refine_controls: true,
            solver: LinearSolver::default(),
            quad_degree: None,
            cordes_policy: CordesPolicy::Enforce,
            fail_on_divergence: true,
        }
    }
}

impl NewtonConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidInput("Newton tolerance must be positive and max_iter at least 1".into()));
        }
        if self.alpha_samples < 2 {
            return Err(Error::InvalidInput("at least two control samples are needed".into()));
        }
        Ok(())
    }

    fn quad_degree_for(&self, degree: usize) -> usize {
        self.quad_degree.unwrap_or(2 * degree + 2)
    }
}

#[derive(Clone)]
pub enum NonlinearProblem {
    /// `det D^2 u = f` with `f > 0`, convex `u`, zero boundary values.
    MongeAmpere { f: ScalarField },
    /// `sup_a (L^a u - f^a) = 0` with zero boundary values.
    Hjb { coefficients: CoefficientSet },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonTrace {
    /// Y-norm of `(u_{n+1} - u_n, g_{n+1} - g_n)`.
    pub increments: Vec<f64>,
    /// Least-squares functional at each new iterate; for HJB with the controls maximising there.
    pub energies: Vec<f64>,
    /// HJB: fraction of quadrature points whose control changed.
    pub control_changes: Vec<f64>,
    /// MA: smallest eigenvalue of the Hessian surrogate at each step.
    pub min_eigenvalues: Vec<f64>,
    /// Largest admissible Cordes epsilon of each frozen field.
    pub cordes_margins: Vec<f64>,
    /// Number of linear solves.
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

impl NewtonTrace {
    /// `iteration,increment,energy` rows.
    pub fn to_csv(&self, level: usize) -> String {
        let mut s = String::new();
        for (i, inc) in self.increments.iter().enumerate() {
            let e = self.energies.get(i).copied().unwrap_or(f64::NAN);
            s.push_str(&format!("{level},{},{inc:.10e},{e:.10e}\n", i + 1));
        }
        s
    }
}

pub const TRACE_HEADER: &str = "level,iteration,increment,energy";

pub struct NewtonResult {
    pub u: FeFunction,
    pub g: FeFunction,
    pub trace: NewtonTrace,
}

/// Controls and frozen coefficients per cell and quadrature point.
#[derive(Clone, Debug)]
pub struct ControlField {
    pub alphas: Vec<Vec<f64>>,
    pub values: Vec<Vec<PointCoefficients>>,
}

pub(crate) fn cofactor(h: &Mat2) -> Mat2 {
    [[h[1][1], -h[1][0]], [-h[0][1], h[0][0]]]
}

fn det(h: &Mat2) -> f64 {
    h[0][0] * h[1][1] - h[0][1] * h[1][0]
}

fn sym(d: &Mat2) -> Mat2 {
    let off = 0.5 * (d[0][1] + d[1][0]);
    [[d[0][0], off], [off, d[1][1]]]
}

fn difference(a: &FeFunction, b: &FeFunction) -> Result<FeFunction> {
    let c = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x - y).collect();
    FeFunction::from_coeffs(a.space().clone(), c)
}

/// Evaluates `op` at every quadrature point of the pair, in cell order.
fn map_points<T: Send>(
    u: &FeFunction,
    g: &FeFunction,
    quad_degree: usize,
    op: impl Fn(usize, usize, &crate::assembly::PairPoint) -> Result<T> + Sync,
) -> Result<Vec<Vec<T>>> {
    let mesh = u.space().mesh();
    let degree = u.space().degree();
    let rule = quadrature(quad_degree)?;
    (0..mesh.n_cells())
        .into_par_iter()
        .map_init(
            || (CellValues::new(degree, &rule), Vec::new()),
            |(cv, pts), k| {
                cv.reinit(mesh, k)?;
                pair_points(cv, u, g, pts);
                pts.iter().enumerate().map(|(q, pp)| op(k, q, pp)).collect()
            },
        )
        .collect()
}

fn solve_frozen(
    space_u: &Arc<FeSpace>,
    space_g: &Arc<FeSpace>,
    values: Vec<Vec<PointCoefficients>>,
    cfg: &NewtonConfig,
) -> Result<(FeFunction, FeFunction, f64)> {
    let ctx = ThetaOperatorContext::new(cfg.theta, CoefficientField::Frozen(Arc::new(values)))?
        .with_quad_degree(cfg.quad_degree_for(space_u.degree()));
    let system = assemble_system(space_u, space_g, &ctx)?;
    let (u, g, stats) = system.solve(&cfg.solver)?;
    log::debug!("linear step: {} unknowns, {} ({:.2e})", system.n(), stats.method, stats.residual);
    let energy = assemble_energy(&ctx, &u, &g)?;
    Ok((u, g, energy))
}

/// Solves `Laplace u0 = 2 sqrt(f)` with zero boundary values by the least-squares method.
pub fn ma_initial_guess(
    space_u: &Arc<FeSpace>,
    space_g: &Arc<FeSpace>,
    f: &ScalarField,
    cfg: &NewtonConfig,
) -> Result<(FeFunction, FeFunction)> {
    let mesh = space_u.mesh();
    let rule = quadrature(cfg.quad_degree_for(space_u.degree()))?;
    let mut values = Vec::with_capacity(mesh.n_cells());
    let mut cv = CellValues::new(space_u.degree(), &rule);
    for k in 0..mesh.n_cells() {
        cv.reinit(mesh, k)?;
        let mut cell = Vec::with_capacity(cv.n_points());
        for &x in &cv.points {
            let fx = f(x);
            if !(fx > 0.0) {
                return Err(Error::NonPositiveSource { value: fx, x: x[0], y: x[1] });
            }
            cell.push(PointCoefficients {
                a: [[1.0, 0.0], [0.0, 1.0]],
                b: [0.0; 2],
                c: 0.0,
                f: 2.0 * fx.sqrt(),
            });
        }
        values.push(cell);
    }
    let (u, g, _) = solve_frozen(space_u, space_g, values, cfg)?;
    Ok((u, g))
}

/// Frozen Monge-Ampere coefficients at `(u_n, g_n)` and the smallest Hessian eigenvalue.
pub fn ma_linearisation(u: &FeFunction, g: &FeFunction, f: &ScalarField, cfg: &NewtonConfig) -> Result<(Vec<Vec<PointCoefficients>>, f64)> {
    let qdeg = cfg.quad_degree_for(u.space().degree());
    let values = map_points(u, g, qdeg, |_, _, pp| {
        let h = sym(&pp.dg);
        let lmin = crate::cordes::min_eigenvalue(&h);
        if !(lmin > 0.0) {
            return Err(Error::ConvexityLost {
                eigenvalue: lmin,
                x: pp.x[0],
                y: pp.x[1],
            });
        }
        Ok((
            PointCoefficients {
                a: cofactor(&h),
                b: [0.0; 2],
                c: 0.0,
                f: f(pp.x) + det(&h),
            },
            lmin,
        ))
    })?;
    let lmin = values.iter().flatten().map(|v| v.1).fold(f64::INFINITY, f64::min);
    Ok((values.into_iter().map(|c| c.into_iter().map(|v| v.0).collect()).collect(), lmin))
}

/// One Newton step for Monge-Ampere.
pub fn ma_newton_step(u: &FeFunction, g: &FeFunction, f: &ScalarField, cfg: &NewtonConfig) -> Result<(FeFunction, FeFunction)> {
    let (values, _) = ma_linearisation(u, g, f, cfg)?;
    let (u1, g1, _) = solve_frozen(u.space(), g.space(), values, cfg)?;
    Ok((u1, g1))
}

/// Maximises `M^a(u, g) - f^a` over the control grid at every quadrature
/// point; ties go to the smallest control. With `refine_controls` the best
/// grid control is improved by two rounds of local grids and then by
/// successive parabolic steps on shrinking brackets, keeping whichever
/// candidate is largest.
pub fn hjb_select_control(u: &FeFunction, g: &FeFunction, coeffs: &CoefficientSet, cfg: &NewtonConfig) -> Result<ControlField> {
    let grid = coeffs.control_grid(cfg.alpha_samples);
    let qdeg = cfg.quad_degree_for(u.space().degree());
    let [lo, hi] = coeffs.controls.unwrap_or([0.0, 0.0]);
    let theta = cfg.theta;
    let selected = map_points(u, g, qdeg, |_, _, pp| {
        let objective = |p: &PointCoefficients| crate::assembly::apply_m_theta(theta, p, pp.u, pp.grad_u, pp.g, &pp.dg) - p.f;
        let mut buf = Vec::with_capacity(grid.len());
        coeffs.model.eval_controls(pp.x, &grid, &mut buf);
        let mut best = 0;
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let vals: Vec<f64> = buf.iter().map(objective).collect();
        for (i, &v) in vals.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { x: pp.x[0], y: pp.x[1] });
            }
            if v > vals[best] {
                best = i;
            }
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        let (mut alpha, mut value, mut coef) = (grid[best], vals[best], buf[best]);
        let flat = vmax - vmin <= 1e-14 * vmax.abs().max(1.0);
        if cfg.refine_controls && grid.len() > 1 && !flat {
            let mut step = grid[1] - grid[0];
            let mut local = Vec::with_capacity(9);
            for _ in 0..2 {
                local.clear();
                local.extend((-4..=4).map(|j| (alpha + step * j as f64 / 4.0).clamp(lo, hi)));
                coeffs.model.eval_controls(pp.x, &local, &mut buf);
                for (a, p) in local.iter().zip(&buf) {
                    let v = objective(p);
                    if v > value {
                        (alpha, value, coef) = (*a, v, *p);
                    }
                }
                step /= 4.0;
            }
            // successive parabolas through alpha - s, alpha, alpha + s
            let mut s = step;
            for _ in 0..PARABOLA_ROUNDS {
                let trial = [(alpha - s).clamp(lo, hi), (alpha + s).clamp(lo, hi)];
                coeffs.model.eval_controls(pp.x, &trial, &mut buf);
                let (p_lo, p_hi) = (buf[0], buf[1]);
                let (vm, vp) = (objective(&p_lo), objective(&p_hi));
                let curvature = vm - 2.0 * value + vp;
                let interior = trial[0] < alpha && alpha < trial[1];
                if vm > value {
                    (alpha, value, coef) = (trial[0], vm, p_lo);
                } else if vp > value {
                    (alpha, value, coef) = (trial[1], vp, p_hi);
                } else if interior && curvature < 0.0 {
                    let a = (alpha + 0.5 * s * (vm - vp) / curvature).clamp(lo, hi);
                    let p = coeffs.model.eval(pp.x, a);
                    let v = objective(&p);
                    if v > value {
                        (alpha, value, coef) = (a, v, p);
                    }
                }
                s /= 8.0;
            }
        }
        Ok((alpha, coef))
    })?;
    let mut alphas = Vec::with_capacity(selected.len());
    let mut values = Vec::with_capacity(selected.len());
    for cell in selected {
        let (a, v): (Vec<f64>, Vec<PointCoefficients>) = cell.into_iter().unzip();
        alphas.push(a);
        values.push(v);
    }
    Ok(ControlField { alphas, values })
}

/// One policy-iteration step with a given control field.
pub fn hjb_newton_step(
    u: &FeFunction,
    g: &FeFunction,
    controls: &ControlField,
    coeffs: &CoefficientSet,
    cfg: &NewtonConfig,
) -> Result<(FeFunction, FeFunction)> {
    check_frozen_cordes(&controls.values, coeffs, cfg.cordes_policy)?;
    let (u1, g1, _) = solve_frozen(u.space(), g.space(), controls.values.clone(), cfg)?;
    Ok((u1, g1))
}

fn check_frozen_cordes(values: &[Vec<PointCoefficients>], coeffs: &CoefficientSet, policy: CordesPolicy) -> Result<f64> {
    let flat: Vec<PointCoefficients> = values.iter().flatten().copied().collect();
    let margin = frozen_margin(&flat, coeffs.lambda);
    if !(margin > 0.0) {
        let msg = format!("frozen coefficients admit no positive epsilon (largest {margin:.4e})");
        match policy {
            CordesPolicy::Enforce => return Err(Error::CordesViolation(msg)),
            CordesPolicy::Warn => log::warn!("{msg}"),
        }
    }
    Ok(margin)
}

/// Largest `|sup_a (M^a(u, g) - f^a)|` over the quadrature points, with the
/// supremum taken over the control grid.
pub fn hjb_residual(u: &FeFunction, g: &FeFunction, coeffs: &CoefficientSet, cfg: &NewtonConfig) -> Result<f64> {
    let controls = hjb_select_control(u, g, coeffs, cfg)?;
    let theta = cfg.theta;
    let qdeg = cfg.quad_degree_for(u.space().degree());
    let res = map_points(u, g, qdeg, |k, q, pp| {
        let p = &controls.values[k][q];
        Ok(crate::assembly::apply_m_theta(theta, p, pp.u, pp.grad_u, pp.g, &pp.dg) - p.f)
    })?;
    Ok(res.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Runs the Newton iteration from `initial` or from the default start: the
/// Poisson guess for Monge-Ampere and zero for HJB.
///
/// Returns with `converged = false` after `max_iter` steps without reaching
/// the tolerance. An increment growing three times in a row is an error
/// unless `fail_on_divergence` is off.
pub fn newton_solve(
    space_u: &Arc<FeSpace>,
    space_g: &Arc<FeSpace>,
    problem: &NonlinearProblem,
    cfg: &NewtonConfig,
    initial: Option<(FeFunction, FeFunction)>,
) -> Result<NewtonResult> {
    cfg.validate()?;
    let mut trace = NewtonTrace::default();
    let (mut u, mut g) = match (initial, problem) {
        (Some(pair), _) => pair,
        (None, NonlinearProblem::MongeAmpere { f }) => ma_initial_guess(space_u, space_g, f, cfg)?,
        (None, NonlinearProblem::Hjb { .. }) => (FeFunction::zeros(space_u.clone()), FeFunction::zeros(space_g.clone())),
    };
    let mut previous_controls: Option<Vec<Vec<f64>>> = None;
    // HJB: controls maximising at the current iterate, and the functional there
    let mut current: Option<(ControlField, f64)> = match problem {
        NonlinearProblem::Hjb { coefficients } => Some(hjb_functional(&u, &g, coefficients, cfg)?),
        NonlinearProblem::MongeAmpere { .. } => None,
    };

    for _ in 0..cfg.max_iter {
        let increment = match problem {
            NonlinearProblem::MongeAmpere { f } => {
                let (values, lmin) = ma_linearisation(&u, &g, f, cfg)?;
                trace.min_eigenvalues.push(lmin);
                trace.cordes_margins.push(frozen_margin(&values.concat(), None));
                let (u1, g1, energy) = solve_frozen(space_u, space_g, values, cfg)?;
                trace.energies.push(energy);
                let increment = y_norm(&difference(&u1, &u)?, &difference(&g1, &g)?)?;
                u = u1;
                g = g1;
                increment
            }
            NonlinearProblem::Hjb { coefficients } => {
                let (controls, energy) = current.take().expect("controls of the current iterate");
                let changed = match &previous_controls {
                    None => 1.0,
                    Some(prev) => control_change(prev, &controls.alphas, coefficients),
                };
                trace.control_changes.push(changed);
                if changed == 0.0 {
                    // same policy, same linear problem: the iterate is a fixed point
                    trace.increments.push(0.0);
                    trace.energies.push(energy);
                    trace.converged = true;
                    break;
                }
                trace
                    .cordes_margins
                    .push(check_frozen_cordes(&controls.values, coefficients, cfg.cordes_policy)?);
                let alphas = controls.alphas;
                let (u1, g1, _) = solve_frozen(space_u, space_g, controls.values, cfg)?;
                previous_controls = Some(alphas);
                let increment = y_norm(&difference(&u1, &u)?, &difference(&g1, &g)?)?;
                let next = hjb_functional(&u1, &g1, coefficients, cfg)?;
                trace.energies.push(next.1);
                current = Some(next);
                (u, g) = (u1, g1);
                increment
            }
        };
        trace.iterations += 1;
        log::info!("Newton step {}: increment {:.3e}", trace.iterations, increment);
        trace.increments.push(increment);
        if increment < cfg.tol {
            trace.converged = true;
            break;
        }
        let n = trace.increments.len();
        if n >= 4 && trace.increments[n - 4..].windows(2).all(|w| w[1] > w[0]) {
            if cfg.fail_on_divergence {
                return Err(Error::Diverged {
                    increments: trace.increments,
                });
            }
            if !trace.diverged {
                log::warn!("Newton increments grew three times in a row: {:?}", &trace.increments[n - 4..]);
            }
            trace.diverged = true;
        }
    }
    Ok(NewtonResult { u, g, trace })
}

/// Maximising controls at `(u, g)` and the least-squares functional they give.
fn hjb_functional(u: &FeFunction, g: &FeFunction, coeffs: &CoefficientSet, cfg: &NewtonConfig) -> Result<(ControlField, f64)> {
    let controls = hjb_select_control(u, g, coeffs, cfg)?;
    let ctx = ThetaOperatorContext::new(cfg.theta, CoefficientField::Frozen(Arc::new(controls.values.clone())))?
        .with_quad_degree(cfg.quad_degree_for(u.space().degree()));
    let energy = assemble_energy(&ctx, u, g)?;
    Ok((controls, energy))
}

/// Fraction of quadrature points whose control moved by more than `1e-9` of the interval.
fn control_change(prev: &[Vec<f64>], next: &[Vec<f64>], coeffs: &CoefficientSet) -> f64 {
    let [lo, hi] = coeffs.controls.unwrap_or([0.0, 1.0]);
    let tol = 1e-9 * (hi - lo).abs().max(1e-300);
    let (mut n, mut changed) = (0usize, 0usize);
    for (a, b) in prev.iter().zip(next) {
        for (x, y) in a.iter().zip(b) {
            n += 1;
            if (x - y).abs() > tol {
                changed += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        changed as f64 / n as f64
    }
}
