//! Least-squares gradient-recovery finite elements for linear elliptic
//! equations in nondivergence form, with semismooth Newton drivers for the
//! Monge-Ampere and Hamilton-Jacobi-Bellman equations.
//!
//! The discrete unknown is a pair `(u_h, g_h)` of continuous Lagrange
//! functions on a triangle mesh, where `g_h` approximates the gradient of
//! `u_h`. The pair minimises
//!
//! ```text
//! E(u, g) = |grad u - g|^2 + |rot g|^2 + |A:Dg + b.(theta g + (1 - theta) grad u) - c u - f|^2
//! ```
//!
//! in L2, which yields a symmetric positive definite linear system whenever
//! the coefficients satisfy a Cordes condition.

pub mod adapt;
pub mod analysis;
pub mod assembly;
pub mod cordes;
pub mod error;
pub mod linsolve;
pub mod mesh;
pub mod nonlinear;
pub mod problems;
pub mod space;
pub mod study;

pub use adapt::{compute_indicators, dorfler_mark, ErrorIndicators};
pub use analysis::{eoc, error_norms, y_norm, ConvergenceRecord, EocBasis, ErrorNorms, ExactSolution};
pub use assembly::{
    apply_m_theta, assemble_energy, assemble_system, CoefficientField, PointCoefficients,
    SparseSymSystem, ThetaOperatorContext,
};
pub use cordes::{check_cordes, CoefficientSet, CordesCondition, CordesReport};
pub use error::{Error, Result};
pub use linsolve::{solve, solve_spd, CsrMatrix, LinearSolver, Preconditioner, SolveStats};
pub use mesh::{generate_disk_mesh, generate_rectangle_mesh, quadrature, Domain, QuadratureRule, TriangleMesh};
pub use nonlinear::{newton_solve, NewtonConfig, NewtonTrace, NonlinearProblem};
pub use problems::{builtin, ProblemKind, ProblemSpec};
pub use space::{build_space, Constraint, FeFunction, FeSpace};

/// A point in the plane.
pub type Point = [f64; 2];
/// Row-major 2x2 matrix.
pub type Mat2 = [[f64; 2]; 2];
