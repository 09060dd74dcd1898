//! Residual error indicators and Dörfler marking.

use crate::assembly::{cell_residuals, ThetaOperatorContext};
use crate::error::{Error, Result};
use crate::space::FeFunction;

/// Per-cell indicators `eta_K^2 = |grad u - g|_K^2 + |rot g|_K^2 + |M(u, g) - f|_K^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorIndicators {
    /// The three terms of every cell, in the order above.
    pub terms: Vec<[f64; 3]>,
    pub eta_sq: Vec<f64>,
}

impl ErrorIndicators {
    pub fn from_terms(terms: Vec<[f64; 3]>) -> Self {
        let eta_sq = terms.iter().map(|t| t[0] + t[1] + t[2]).collect();
        Self { terms, eta_sq }
    }

    pub fn total_sq(&self) -> f64 {
        self.eta_sq.iter().sum()
    }

    pub fn eta(&self) -> f64 {
        self.total_sq().sqrt()
    }

    pub fn len(&self) -> usize {
        self.eta_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta_sq.is_empty()
    }
}

pub fn compute_indicators(ctx: &ThetaOperatorContext, u: &FeFunction, g: &FeFunction) -> Result<ErrorIndicators> {
    Ok(ErrorIndicators::from_terms(cell_residuals(ctx, u, g)?))
}

/// Smallest greedy set (largest `eta_K^2` first, ties by cell index) whose
/// mass reaches `fraction` of the total. `fraction = 1` marks every cell with
/// a positive indicator.
pub fn dorfler_mark(ind: &ErrorIndicators, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("marking fraction must lie in (0, 1], got {fraction}")));
    }
    let mut order: Vec<usize> = (0..ind.len()).collect();
    order.sort_by(|&a, &b| ind.eta_sq[b].total_cmp(&ind.eta_sq[a]).then(a.cmp(&b)));
    if fraction >= 1.0 {
        return Ok(order.into_iter().filter(|&k| ind.eta_sq[k] > 0.0).collect());
    }
    let target = fraction * ind.total_sq() * (1.0 - 1e-12);
    let mut mass = 0.0;
    let mut marked = Vec::new();
    for k in order {
        if mass >= target || ind.eta_sq[k] <= 0.0 {
            break;
        }
        mass += ind.eta_sq[k];
        marked.push(k);
    }
    Ok(marked)
}
