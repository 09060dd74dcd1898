//! Coefficient data and sampled verification of the Cordes conditions.
//!
//! In two dimensions the general condition asks for
//! `(|A|^2 + |b|^2 / (2 lambda) + (c / lambda)^2) / (tr A + c / lambda)^2 <= 1 / (2 + eps)`
//! and the special condition (only when `b = 0`, `c = 0`) for
//! `|A|^2 / (tr A)^2 <= 1 / (1 + eps)`, with the Frobenius norm `|.|`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::PointCoefficients;
use crate::error::{Error, Result};
use crate::mesh::{quadrature, Domain, TriangleMesh};
use crate::space::map_point;
use crate::{Mat2, Point};

const DIM: f64 = 2.0;

/// Pointwise coefficients `A, b, c, f` as functions of position and control.
pub trait CoefficientModel: Send + Sync {
    fn eval(&self, x: Point, alpha: f64) -> PointCoefficients;

    /// Evaluates several controls at one point; override when work can be shared.
    fn eval_controls(&self, x: Point, alphas: &[f64], out: &mut Vec<PointCoefficients>) {
        out.clear();
        out.extend(alphas.iter().map(|&a| self.eval(x, a)));
    }
}

impl<F> CoefficientModel for F
where
    F: Fn(Point, f64) -> PointCoefficients + Send + Sync,
{
    fn eval(&self, x: Point, alpha: f64) -> PointCoefficients {
        self(x, alpha)
    }
}

/// Coefficients together with the control interval and Cordes parameters.
#[derive(Clone)]
pub struct CoefficientSet {
    pub model: Arc<dyn CoefficientModel>,
    /// Closed control interval; `None` for a single, control-free operator.
    pub controls: Option<[f64; 2]>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("controls", &self.controls)
            .field("lambda", &self.lambda)
            .field("epsilon", &self.epsilon)
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    pub fn new(model: impl CoefficientModel + 'static) -> Self {
        Self {
            model: Arc::new(model),
            controls: None,
            lambda: None,
            epsilon: None,
        }
    }

    pub fn with_controls(mut self, lo: f64, hi: f64) -> Self {
        self.controls = Some([lo, hi]);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn eval(&self, x: Point, alpha: f64) -> PointCoefficients {
        self.model.eval(x, alpha)
    }

    /// Uniform grid of `n` controls including both end points; `[lo]` without controls.
    pub fn control_grid(&self, n: usize) -> Vec<f64> {
        match self.controls {
            None => vec![0.0],
            Some([lo, hi]) if n <= 1 || hi == lo => vec![lo],
            Some([lo, hi]) => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

/// What to do when a problem's data fail the Cordes check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CordesPolicy {
    #[default]
    Enforce,
    /// Log the failure and continue.
    Warn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CordesCondition {
    General,
    Special,
}

impl fmt::Display for CordesCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CordesCondition::General => "general",
            CordesCondition::Special => "special",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CordesReport {
    pub condition: CordesCondition,
    pub lambda: f64,
    pub sample_points: Vec<Point>,
    /// Worst ratio over the controls, one entry per sample point.
    pub ratios: Vec<f64>,
    pub worst_ratio: f64,
    pub worst_point: Point,
    pub worst_alpha: f64,
    /// `1 / worst_ratio - d` (general) or `1 / worst_ratio - (d - 1)` (special).
    pub max_epsilon: f64,
    /// Declared epsilon that the check was run against, if any.
    pub epsilon: Option<f64>,
    /// Smallest eigenvalue of `A` over all samples.
    pub ellipticity: f64,
    pub max_asymmetry: f64,
    pub min_c: f64,
    pub n_points: usize,
    pub n_alpha: usize,
    /// Some controls have `b = 0, c = 0` and others do not.
    pub mixed: bool,
    pub passed: bool,
    pub diagnostics: Vec<String>,
}

impl CordesReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,ratio\n");
        for (p, r) in self.sample_points.iter().zip(&self.ratios) {
            s.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", p[0], p[1], r));
        }
        s
    }
}

impl fmt::Display for CordesReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16}{}", "condition", self.condition)?;
        writeln!(f, "{:<16}{} x {}", "samples", self.n_points, self.n_alpha)?;
        writeln!(f, "{:<16}{:.6e}", "worst ratio", self.worst_ratio)?;
        writeln!(
            f,
            "{:<16}({:.6}, {:.6}), alpha = {:.6}",
            "worst at", self.worst_point[0], self.worst_point[1], self.worst_alpha
        )?;
        writeln!(f, "{:<16}{:.6e}", "ellipticity", self.ellipticity)?;
        writeln!(f, "{:<16}{:.3e}", "asymmetry", self.max_asymmetry)?;
        writeln!(f, "{:<16}{:.6e}", "min c", self.min_c)?;
        for d in &self.diagnostics {
            writeln!(f, "{:<16}{}", "note", d)?;
        }
        let target = self.epsilon.map(|e| format!(" (required {e})")).unwrap_or_default();
        write!(
            f,
            "{} lambda={} eps>={:.6}{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.lambda,
            self.max_epsilon,
            target
        )
    }
}

/// Evaluation points for [`check_cordes`]: the quadrature points of `mesh`
/// at the given degree plus a 64 x 64 grid over its bounding box restricted
/// to the domain.
pub fn cordes_samples(mesh: &TriangleMesh, quad_degree: usize) -> Result<Vec<Point>> {
    let rule = quadrature(quad_degree)?;
    let mut pts = Vec::with_capacity(mesh.n_cells() * rule.len() + 64 * 64);
    for k in 0..mesh.n_cells() {
        for q in 0..rule.len() {
            let (xi, eta) = rule.ref_point(q);
            pts.push(map_point(mesh, k, xi, eta)?.x);
        }
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in mesh.vertices() {
        for d in 0..2 {
            lo[d] = lo[d].min(v[d]);
            hi[d] = hi[d].max(v[d]);
        }
    }
    pts.extend(grid_samples(mesh.domain(), lo, hi, 64));
    Ok(pts)
}

/// Squared Frobenius norm.
pub fn frobenius_sq(a: &Mat2) -> f64 {
    a.iter().flatten().map(|v| v * v).sum()
}

pub fn min_eigenvalue(a: &Mat2) -> f64 {
    let m = 0.5 * (a[0][0] + a[1][1]);
    let d = 0.5 * (a[0][0] - a[1][1]);
    let off = 0.5 * (a[0][1] + a[1][0]);
    m - d.hypot(off)
}

pub fn general_ratio(p: &PointCoefficients, lambda: f64) -> f64 {
    let b2 = p.b[0] * p.b[0] + p.b[1] * p.b[1];
    let num = frobenius_sq(&p.a) + b2 / (2.0 * lambda) + (p.c / lambda).powi(2);
    num / (p.a[0][0] + p.a[1][1] + p.c / lambda).powi(2)
}

pub fn special_ratio(p: &PointCoefficients) -> f64 {
    frobenius_sq(&p.a) / (p.a[0][0] + p.a[1][1]).powi(2)
}

/// Largest admissible epsilon for a worst-case ratio.
pub fn epsilon_from_ratio(condition: CordesCondition, ratio: f64) -> f64 {
    match condition {
        CordesCondition::General => 1.0 / ratio - DIM,
        CordesCondition::Special => 1.0 / ratio - (DIM - 1.0),
    }
}

// per (point, control): |A|^2, tr A, |b|^2, c
type Invariants = [f64; 4];

/// Samples the Cordes quotient at `points` times `n_alpha` controls.
///
/// The special condition is used when `b` and `c` vanish at every sample,
/// the general one when they are non-zero somewhere for every control. A mix
/// of both across controls fails. Without a declared `lambda` the general
/// condition searches `lambda` in `[1e-3, 1e3]` for the largest margin. The
/// check passes when the margin is positive, at least the declared epsilon,
/// `A` is symmetric and uniformly elliptic and `c >= 0`.
pub fn check_cordes(coeffs: &CoefficientSet, points: &[Point], n_alpha: usize) -> Result<CordesReport> {
    if points.is_empty() {
        return Err(Error::InvalidInput("Cordes check needs at least one sample".into()));
    }
    let alphas = coeffs.control_grid(n_alpha.max(1));
    let na = alphas.len();

    let evaluated: Vec<Vec<PointCoefficients>> = points
        .par_iter()
        .map(|&x| {
            let mut out = Vec::with_capacity(na);
            coeffs.model.eval_controls(x, &alphas, &mut out);
            out
        })
        .collect();

    let mut max_asymmetry = 0.0f64;
    let mut ellipticity = f64::INFINITY;
    let mut min_c = f64::INFINITY;
    let mut lower_order = vec![false; na];
    let mut invariants: Vec<Invariants> = Vec::with_capacity(points.len() * na);
    for (p, row) in points.iter().zip(&evaluated) {
        for (j, pc) in row.iter().enumerate() {
            let vals = [pc.a[0][0], pc.a[0][1], pc.a[1][0], pc.a[1][1], pc.b[0], pc.b[1], pc.c];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { x: p[0], y: p[1] });
            }
            max_asymmetry = max_asymmetry.max((pc.a[0][1] - pc.a[1][0]).abs() * 2f64.sqrt());
            ellipticity = ellipticity.min(min_eigenvalue(&pc.a));
            min_c = min_c.min(pc.c);
            lower_order[j] |= pc.b != [0.0, 0.0] || pc.c != 0.0;
            invariants.push([frobenius_sq(&pc.a), pc.a[0][0] + pc.a[1][1], pc.b[0].powi(2) + pc.b[1].powi(2), pc.c]);
        }
    }

    let mut diagnostics = Vec::new();
    let n_general = lower_order.iter().filter(|&&g| g).count();
    let mixed = n_general > 0 && n_general < na;
    let condition = if n_general == 0 {
        CordesCondition::Special
    } else {
        CordesCondition::General
    };
    if mixed {
        diagnostics.push(format!(
            "b and c vanish for {} of {} controls only; a single condition cannot hold uniformly",
            na - n_general,
            na
        ));
    }

    let lambda = match (condition, coeffs.lambda) {
        (_, Some(l)) if !(l > 0.0) => return Err(Error::InvalidInput(format!("lambda must be positive, got {l}"))),
        (_, Some(l)) => l,
        (CordesCondition::Special, None) => 1.0,
        (CordesCondition::General, None) => search_lambda(&invariants),
    };

    let quotient = |inv: &Invariants| -> f64 {
        match condition {
            CordesCondition::Special => inv[0] / (inv[1] * inv[1]),
            CordesCondition::General => {
                (inv[0] + inv[2] / (2.0 * lambda) + (inv[3] / lambda).powi(2)) / (inv[1] + inv[3] / lambda).powi(2)
            }
        }
    };

    let mut ratios = Vec::with_capacity(points.len());
    let (mut worst_ratio, mut worst_point, mut worst_alpha) = (f64::NEG_INFINITY, points[0], alphas[0]);
    for (i, p) in points.iter().enumerate() {
        let mut r_max = f64::NEG_INFINITY;
        for (j, inv) in invariants[i * na..(i + 1) * na].iter().enumerate() {
            let denominator = match condition {
                CordesCondition::Special => inv[1],
                CordesCondition::General => inv[1] + inv[3] / lambda,
            };
            if !(denominator > 0.0) {
                return Err(Error::CordesUndefined {
                    x: p[0],
                    y: p[1],
                    denominator,
                });
            }
            let r = quotient(inv);
            if r > r_max {
                r_max = r;
            }
            if r > worst_ratio {
                worst_ratio = r;
                worst_point = *p;
                worst_alpha = alphas[j];
            }
        }
        ratios.push(r_max);
    }

    let max_epsilon = epsilon_from_ratio(condition, worst_ratio);
    let mut passed = !mixed && max_epsilon > 0.0;
    if let Some(eps) = coeffs.epsilon {
        if max_epsilon < eps {
            passed = false;
            diagnostics.push(format!("largest admissible epsilon {max_epsilon:.6} is below the declared {eps}"));
        }
    }
    if max_asymmetry > 1e-12 {
        passed = false;
        diagnostics.push(format!("A is not symmetric (|A - A^T| = {max_asymmetry:.3e})"));
    }
    if !(ellipticity > 0.0) {
        passed = false;
        diagnostics.push(format!("A is not uniformly elliptic (smallest eigenvalue {ellipticity:.3e})"));
    }
    if min_c < 0.0 {
        passed = false;
        diagnostics.push(format!("c is negative somewhere (min {min_c:.3e})"));
    }

    Ok(CordesReport {
        condition,
        lambda,
        sample_points: points.to_vec(),
        ratios,
        worst_ratio,
        worst_point,
        worst_alpha,
        max_epsilon,
        epsilon: coeffs.epsilon,
        ellipticity,
        max_asymmetry,
        min_c,
        n_points: points.len(),
        n_alpha: na,
        mixed,
        passed,
        diagnostics,
    })
}

/// Golden-section search in `log(lambda)` minimising the worst general ratio.
fn search_lambda(invariants: &[Invariants]) -> f64 {
    let worst = |log_l: f64| -> f64 {
        let l = log_l.exp();
        invariants
            .par_iter()
            .map(|inv| (inv[0] + inv[2] / (2.0 * l) + (inv[3] / l).powi(2)) / (inv[1] + inv[3] / l).powi(2))
            .reduce(|| f64::NEG_INFINITY, f64::max)
    };
    let (mut a, mut b) = (1e-3f64.ln(), 1e3f64.ln());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (worst(c), worst(d));
    while b - a > 1e-8 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = worst(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = worst(d);
        }
    }
    (0.5 * (a + b)).exp()
}

/// Worst ratio of a frozen coefficient field under a fixed `lambda`, used by
/// the Newton drivers. Returns the largest admissible epsilon.
pub(crate) fn frozen_margin(values: &[PointCoefficients], lambda: Option<f64>) -> f64 {
    let special = values.iter().all(|p| p.b == [0.0, 0.0] && p.c == 0.0);
    if special {
        let worst = values.iter().map(special_ratio).fold(f64::NEG_INFINITY, f64::max);
        epsilon_from_ratio(CordesCondition::Special, worst)
    } else {
        let l = lambda.unwrap_or(1.0);
        let worst = values.iter().map(|p| general_ratio(p, l)).fold(f64::NEG_INFINITY, f64::max);
        epsilon_from_ratio(CordesCondition::General, worst)
    }
}

/// Cell-centred `n x n` grid over a box, restricted to the domain.
pub fn grid_samples(domain: &Domain, lo: Point, hi: Point, n: usize) -> Vec<Point> {
    let mut pts = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let p = [
                lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / n as f64,
                lo[1] + (hi[1] - lo[1]) * (j as f64 + 0.5) / n as f64,
            ];
            if domain.contains(p) {
                pts.push(p);
            }
        }
    }
    pts
}
