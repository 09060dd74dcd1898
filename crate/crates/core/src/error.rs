use thiserror::Error;

use crate::linsolve::SolveError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported polynomial degree {0} (expected 1 or 2)")]
    UnsupportedDegree(usize),

    #[error("unsupported quadrature degree {0} (expected 1..=10)")]
    UnsupportedQuadrature(usize),

    #[error("point ({0}, {1}) lies outside the reference triangle")]
    OutsideReference(f64, f64),

    #[error("non-finite field value at ({x}, {y})")]
    NonFinite { x: f64, y: f64 },

    #[error("unsupported constraint: {0}")]
    UnsupportedConstraint(String),

    #[error("cell {cell} has non-positive Jacobian determinant {det:e}")]
    DegenerateCell { cell: usize, det: f64 },

    #[error("Cordes quotient undefined at ({x}, {y}): tr A + c/lambda = {denominator:e}")]
    CordesUndefined { x: f64, y: f64, denominator: f64 },

    #[error("Cordes condition violated: {0}")]
    CordesViolation(String),

    #[error("Hessian surrogate lost positive definiteness: eigenvalue {eigenvalue:e} at ({x}, {y})")]
    ConvexityLost { eigenvalue: f64, x: f64, y: f64 },

    #[error("source term must be positive, found {value:e} at ({x}, {y})")]
    NonPositiveSource { value: f64, x: f64, y: f64 },

    #[error("Newton iteration diverged, increments {increments:?}")]
    Diverged { increments: Vec<f64> },

    #[error("linear solve failed: {0}")]
    Solve(#[from] SolveError),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-monotone mesh sizes in EOC input")]
    NonMonotone,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
