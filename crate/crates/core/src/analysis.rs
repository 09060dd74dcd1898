//! Error norms against exact solutions, convergence rates and experiment records.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::assembly::{check_pair_spaces, pair_points};
use crate::error::{Error, Result};
use crate::mesh::quadrature;
use crate::space::{CellValues, FeFunction};
use crate::{Mat2, Point};

/// Closed-form solution with its first and second derivatives.
pub trait ExactSolution: Send + Sync {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> [f64; 2];
    fn hessian(&self, x: Point) -> Mat2;
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    pub u_l2: f64,
    /// Full H1 norm of `u - u_h`.
    pub u_h1: f64,
    pub g_l2: f64,
    /// Full H1 norm of `grad u - g_h`.
    pub g_h1: f64,
    /// `sqrt(u_h1^2 + g_h1^2)`.
    pub y: f64,
}

impl ErrorNorms {
    pub fn u_h1_semi(&self) -> f64 {
        (self.u_h1.powi(2) - self.u_l2.powi(2)).max(0.0).sqrt()
    }

    pub fn g_h1_semi(&self) -> f64 {
        (self.g_h1.powi(2) - self.g_l2.powi(2)).max(0.0).sqrt()
    }
}

/// Errors of `(u_h, g_h)` against `(u, grad u)` with a quadrature of degree
/// `2k + 4` unless `quad_degree` is given.
pub fn error_norms(u_h: &FeFunction, g_h: &FeFunction, exact: &dyn ExactSolution, quad_degree: Option<usize>) -> Result<ErrorNorms> {
    check_pair_spaces(u_h.space(), g_h.space())?;
    let degree = u_h.space().degree();
    let rule = quadrature(quad_degree.unwrap_or(2 * degree + 4).min(10))?;
    let mesh = u_h.space().mesh();
    // [u L2, u semi, g L2, g semi]
    let parts: Vec<[f64; 4]> = (0..mesh.n_cells())
        .into_par_iter()
        .map_init(
            || (CellValues::new(degree, &rule), Vec::new()),
            |(cv, pts), k| -> Result<[f64; 4]> {
                cv.reinit(mesh, k)?;
                pair_points(cv, u_h, g_h, pts);
                let mut acc = [0.0; 4];
                for pp in pts.iter() {
                    let (v, gr, he) = (exact.value(pp.x), exact.gradient(pp.x), exact.hessian(pp.x));
                    acc[0] += pp.jxw * (v - pp.u).powi(2);
                    for i in 0..2 {
                        acc[1] += pp.jxw * (gr[i] - pp.grad_u[i]).powi(2);
                        acc[2] += pp.jxw * (gr[i] - pp.g[i]).powi(2);
                        for j in 0..2 {
                            acc[3] += pp.jxw * (he[i][j] - pp.dg[i][j]).powi(2);
                        }
                    }
                }
                Ok(acc)
            },
        )
        .collect::<Result<_>>()?;
    let mut s = [0.0; 4];
    for p in &parts {
        for i in 0..4 {
            s[i] += p[i];
        }
    }
    Ok(ErrorNorms {
        u_l2: s[0].sqrt(),
        u_h1: (s[0] + s[1]).sqrt(),
        g_l2: s[2].sqrt(),
        g_h1: (s[2] + s[3]).sqrt(),
        y: (s[0] + s[1] + s[2] + s[3]).sqrt(),
    })
}

/// The product norm `sqrt(|u|_{H1}^2 + |g|_{H1}^2)` with full H1 norms.
pub fn y_norm(u: &FeFunction, g: &FeFunction) -> Result<f64> {
    struct Zero;
    impl ExactSolution for Zero {
        fn value(&self, _: Point) -> f64 {
            0.0
        }
        fn gradient(&self, _: Point) -> [f64; 2] {
            [0.0; 2]
        }
        fn hessian(&self, _: Point) -> Mat2 {
            [[0.0; 2]; 2]
        }
    }
    // against the zero solution, "g error" measures g itself
    Ok(error_norms(u, g, &Zero, Some(2 * u.space().degree()))?.y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EocBasis {
    /// Rates against the mesh size `h`.
    MeshSize,
    /// Rates against `dofs^(-1/2)`.
    Dofs,
}

/// One refinement level of an experiment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceRecord {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub errors: Option<ErrorNorms>,
    pub eta: f64,
    pub eoc_y: Option<f64>,
    pub newton_iters: usize,
}

pub const CSV_HEADER: &str = "level,h,dofs,err_u_l2,err_u_h1,err_g_l2,err_g_h1,err_Y,eta,eoc_Y,newton_iters";

impl ConvergenceRecord {
    pub fn size(&self, basis: EocBasis) -> f64 {
        match basis {
            EocBasis::MeshSize => self.h,
            EocBasis::Dofs => (self.dofs as f64).powf(-0.5),
        }
    }

    pub fn csv_row(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.10e}")).unwrap_or_else(|| "nan".into());
        let e = self.errors;
        format!(
            "{},{:.10e},{},{},{},{},{},{},{:.10e},{},{}",
            self.level,
            self.h,
            self.dofs,
            fmt(e.map(|e| e.u_l2)),
            fmt(e.map(|e| e.u_h1)),
            fmt(e.map(|e| e.g_l2)),
            fmt(e.map(|e| e.g_h1)),
            fmt(e.map(|e| e.y)),
            self.eta,
            fmt(self.eoc_y),
            self.newton_iters
        )
    }

    /// Fills `eoc_y` of every record after the first from the Y-norm errors.
    pub fn fill_eoc(records: &mut [ConvergenceRecord], basis: EocBasis) -> Result<()> {
        if records.len() < 2 || records.iter().any(|r| r.errors.is_none()) {
            return Ok(());
        }
        let sizes: Vec<f64> = records.iter().map(|r| r.size(basis)).collect();
        let errors: Vec<f64> = records.iter().map(|r| r.errors.unwrap().y).collect();
        let rates = eoc(&sizes, &errors)?;
        records[0].eoc_y = None;
        for (r, rate) in records[1..].iter_mut().zip(rates) {
            r.eoc_y = Some(rate);
        }
        Ok(())
    }
}

pub fn records_to_csv(records: &[ConvergenceRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

/// Parses a file written by [`records_to_csv`]. Missing values are `nan`.
pub fn records_from_csv(text: &str) -> Result<Vec<ConvergenceRecord>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let err = |m: String| Error::Parse { line: i + 1, message: m };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 11 {
                return Err(err(format!("expected 11 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
            let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("`{s}`: {e}")));
            let vals = [num(f[3])?, num(f[4])?, num(f[5])?, num(f[6])?, num(f[7])?];
            let errors = vals.iter().all(|v| !v.is_nan()).then_some(ErrorNorms {
                u_l2: vals[0],
                u_h1: vals[1],
                g_l2: vals[2],
                g_h1: vals[3],
                y: vals[4],
            });
            let eoc_y = num(f[9])?;
            Ok(ConvergenceRecord {
                level: int(f[0])?,
                h: num(f[1])?,
                dofs: int(f[2])?,
                errors,
                eta: num(f[8])?,
                eoc_y: (!eoc_y.is_nan()).then_some(eoc_y),
                newton_iters: int(f[10])?,
            })
        })
        .collect()
}

/// Rates `log(e_{l-1} / e_l) / log(s_{l-1} / s_l)` between consecutive
/// levels. The sizes must decrease strictly.
pub fn eoc(sizes: &[f64], errors: &[f64]) -> Result<Vec<f64>> {
    if sizes.len() != errors.len() || sizes.len() < 2 {
        return Err(Error::InvalidInput("EOC needs at least two (size, error) pairs".into()));
    }
    if sizes.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::NonMonotone);
    }
    Ok(sizes
        .windows(2)
        .zip(errors.windows(2))
        .map(|(s, e)| (e[0] / e[1]).ln() / (s[0] / s[1]).ln())
        .collect())
}

/// Least-squares slope of `log e` against `log s`.
pub fn fitted_rate(sizes: &[f64], errors: &[f64]) -> Result<f64> {
    if sizes.len() != errors.len() || sizes.len() < 2 {
        return Err(Error::InvalidInput("a fitted rate needs at least two points".into()));
    }
    let xs: Vec<f64> = sizes.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::NonMonotone);
    }
    Ok(sxy / sxx)
}
