//! Sparse symmetric storage and solvers for the assembled systems.

use rayon::prelude::*;
use thiserror::Error;

/// Systems below this size may be solved by dense Cholesky.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("no convergence after {iterations} iterations, relative residual {residual:e}")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("CG breakdown at iteration {iteration}: curvature {curvature:e} (matrix not positive definite)")]
    Breakdown { iteration: usize, curvature: f64 },
    #[error("Cholesky factorization failed: {0}")]
    NotPositiveDefinite(String),
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
}

/// Square matrix in compressed sparse row form with sorted, unique columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries in the order they appear, so the result is
    /// independent of thread scheduling as long as the input order is.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.par_sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len() / 2);
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len() / 2);
        let mut last = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "entry ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let triplets = rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(move |(j, &v)| (i, j, v))
            })
            .collect();
        Self::from_triplets(n, triplets)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, yi)| {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        });
    }

    /// Largest `|a_ij - a_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// MatrixMarket coordinate format, full symmetric storage, 1-based indices.
    pub fn write_matrix_market(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
    /// Zero fill-in incomplete Cholesky, retried with a growing diagonal shift on breakdown.
    IncompleteCholesky,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinearSolver {
    Cg {
        preconditioner: Preconditioner,
        rel_tol: f64,
        max_iter: usize,
    },
    DenseCholesky,
    SparseCholesky,
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::SparseCholesky
    }
}

impl LinearSolver {
    pub fn cg() -> Self {
        LinearSolver::Cg {
            preconditioner: Preconditioner::Jacobi,
            rel_tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub method: &'static str,
    pub iterations: usize,
    /// Final `||b - Ax|| / ||b||`.
    pub residual: f64,
    /// Relative preconditioned residual `sqrt(r.z) / sqrt(r0.z0)` per CG iteration.
    pub history: Vec<f64>,
}

pub fn solve(matrix: &CsrMatrix, rhs: &[f64], solver: &LinearSolver) -> Result<(Vec<f64>, SolveStats), SolveError> {
    check_dims(matrix, rhs)?;
    match *solver {
        LinearSolver::Cg {
            preconditioner,
            rel_tol,
            max_iter,
        } => pcg(matrix, rhs, preconditioner, rel_tol, max_iter),
        LinearSolver::DenseCholesky => dense_cholesky(matrix, rhs),
        LinearSolver::SparseCholesky => sparse_cholesky(matrix, rhs),
    }
}

/// Jacobi-preconditioned conjugate gradients.
pub fn solve_spd(matrix: &CsrMatrix, rhs: &[f64], rel_tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats), SolveError> {
    check_dims(matrix, rhs)?;
    pcg(matrix, rhs, Preconditioner::Jacobi, rel_tol, max_iter)
}

fn check_dims(matrix: &CsrMatrix, rhs: &[f64]) -> Result<(), SolveError> {
    if matrix.n() != rhs.len() {
        return Err(SolveError::DimensionMismatch {
            matrix: matrix.n(),
            vector: rhs.len(),
        });
    }
    Ok(())
}

/// Fixed-size chunks summed in order keep the result independent of the thread count.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    const CHUNK: usize = 4096;
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(x, y)| x * y).sum())
        .collect();
    partial.iter().sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn relative_residual(matrix: &CsrMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = matrix.matvec(x);
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let nb = norm(rhs);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

enum Precond {
    Identity,
    Diagonal(Vec<f64>),
    Ic(IncompleteCholesky),
}

impl Precond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Identity => z.copy_from_slice(r),
            Precond::Diagonal(inv) => z.par_iter_mut().zip(r).zip(inv).for_each(|((z, r), d)| *z = r * d),
            Precond::Ic(ic) => ic.apply(r, z),
        }
    }
}

fn pcg(
    matrix: &CsrMatrix,
    rhs: &[f64],
    preconditioner: Preconditioner,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats), SolveError> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(SolveError::InvalidParameter(format!("rel_tol {rel_tol} not in (0, 1)")));
    }
    let n = matrix.n();
    let method = match preconditioner {
        Preconditioner::None => "cg",
        Preconditioner::Jacobi => "pcg-jacobi",
        Preconditioner::IncompleteCholesky => "pcg-ic0",
    };
    let pre = match preconditioner {
        Preconditioner::None => Precond::Identity,
        Preconditioner::Jacobi => {
            let diag = matrix.diagonal();
            if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
                return Err(SolveError::Breakdown {
                    iteration: 0,
                    curvature: diag[i],
                });
            }
            Precond::Diagonal(diag.iter().map(|d| 1.0 / d).collect())
        }
        Preconditioner::IncompleteCholesky => Precond::Ic(IncompleteCholesky::new(matrix)?),
    };

    let mut x = vec![0.0; n];
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                method,
                ..Default::default()
            },
        ));
    }
    let mut r = rhs.to_vec();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let rz0 = rz;
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=max_iter {
        matrix.matvec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(SolveError::Breakdown {
                iteration: it,
                curvature,
            });
        }
        let alpha = rz / curvature;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        history.push((rz_new.max(0.0) / rz0).sqrt());
        if norm(&r) <= rel_tol * bnorm {
            let residual = relative_residual(matrix, &x, rhs);
            return Ok((
                x,
                SolveStats {
                    method,
                    iterations: it,
                    residual,
                    history,
                },
            ));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(SolveError::NotConverged {
        iterations: max_iter,
        residual: norm(&r) / bnorm,
        history,
    })
}

/// IC(0): lower factor with the sparsity of the lower triangle of `A`.
struct IncompleteCholesky {
    n: usize,
    // row-wise lower factor, diagonal last in each row
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl IncompleteCholesky {
    fn new(matrix: &CsrMatrix) -> Result<Self, SolveError> {
        let diag_max = matrix.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut shift = 0.0;
        for _ in 0..12 {
            if let Some(ic) = Self::try_factor(matrix, shift) {
                if shift > 0.0 {
                    log::debug!("IC(0) needed diagonal shift {shift:e}");
                }
                return Ok(ic);
            }
            shift = if shift == 0.0 { 1e-3 * diag_max } else { 4.0 * shift };
        }
        Err(SolveError::NotPositiveDefinite("IC(0) failed for every diagonal shift".into()))
    }

    fn try_factor(matrix: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = matrix.n();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for (j, v) in matrix.row(i).filter(|&(j, _)| j <= i) {
                col_idx.push(j);
                values.push(if i == j { v + shift } else { v });
            }
            row_ptr.push(col_idx.len());
            if col_idx.last() != Some(&i) {
                return None;
            }
        }
        let mut l = Self {
            n,
            row_ptr,
            col_idx,
            values,
        };
        let diag_pos = |l: &Self, k: usize| l.row_ptr[k + 1] - 1;
        for i in 0..n {
            let (start, end) = (l.row_ptr[i], l.row_ptr[i + 1]);
            for p in start..end {
                let j = l.col_idx[p];
                // l_ij = (a_ij - sum_{k<j} l_ik l_jk) / l_jj over the common pattern
                let mut s = l.values[p];
                let (js, je) = (l.row_ptr[j], l.row_ptr[j + 1] - 1);
                let (mut a, mut b) = (start, js);
                while a < p && b < je {
                    match l.col_idx[a].cmp(&l.col_idx[b]) {
                        std::cmp::Ordering::Less => a += 1,
                        std::cmp::Ordering::Greater => b += 1,
                        std::cmp::Ordering::Equal => {
                            s -= l.values[a] * l.values[b];
                            a += 1;
                            b += 1;
                        }
                    }
                }
                if j == i {
                    if !(s > 0.0) {
                        return None;
                    }
                    l.values[p] = s.sqrt();
                } else {
                    l.values[p] = s / l.values[diag_pos(&l, j)];
                }
            }
        }
        Some(l)
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        // L y = r
        for i in 0..self.n {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1] - 1);
            let mut v = r[i];
            for p in s..e {
                v -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = v / self.values[e];
        }
        // L^T z = y, column-oriented over the rows of L
        for i in (0..self.n).rev() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1] - 1);
            z[i] /= self.values[e];
            let zi = z[i];
            for p in s..e {
                z[self.col_idx[p]] -= self.values[p] * zi;
            }
        }
    }
}

fn dense_cholesky(matrix: &CsrMatrix, rhs: &[f64]) -> Result<(Vec<f64>, SolveStats), SolveError> {
    let n = matrix.n();
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in matrix.row(i) {
            a[(i, j)] = v;
        }
    }
    let chol = nalgebra::Cholesky::new(a)
        .ok_or_else(|| SolveError::NotPositiveDefinite("dense Cholesky found a non-positive pivot".into()))?;
    let x: Vec<f64> = chol.solve(&nalgebra::DVector::from_column_slice(rhs)).iter().copied().collect();
    let residual = relative_residual(matrix, &x, rhs);
    Ok((
        x,
        SolveStats {
            method: "dense-cholesky",
            iterations: 1,
            residual,
            history: Vec::new(),
        },
    ))
}

fn sparse_cholesky(matrix: &CsrMatrix, rhs: &[f64]) -> Result<(Vec<f64>, SolveStats), SolveError> {
    use faer::linalg::solvers::Solve;
    use faer::sparse::{SparseColMat, Triplet};
    use faer::{Col, Side};

    let n = matrix.n();
    let triplets: Vec<Triplet<usize, usize, f64>> = (0..n)
        .flat_map(|i| matrix.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| Triplet::new(i, j, v)))
        .collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| SolveError::NotPositiveDefinite(format!("{e:?}")))?;
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| SolveError::NotPositiveDefinite(format!("{e:?}")))?;
    let b = Col::<f64>::from_fn(n, |i| rhs[i]);
    let sol = llt.solve(&b);
    let x: Vec<f64> = (0..n).map(|i| sol[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NotPositiveDefinite("sparse Cholesky produced non-finite values".into()));
    }
    let residual = relative_residual(matrix, &x, rhs);
    Ok((
        x,
        SolveStats {
            method: "sparse-cholesky",
            iterations: 1,
            residual,
            history: Vec::new(),
        },
    ))
}

/// Smallest Ritz value of `matrix` after `steps` Lanczos iterations with full
/// reorthogonalisation, started from a fixed deterministic vector. It is an
/// upper bound for the smallest eigenvalue.
pub fn lanczos_min_ritz(matrix: &CsrMatrix, steps: usize) -> f64 {
    let n = matrix.n();
    if n == 0 {
        return f64::INFINITY;
    }
    let steps = steps.min(n).max(1);
    let mut q: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let s = norm(&q);
    q.iter_mut().for_each(|v| *v /= s);
    let mut basis = vec![q];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    for k in 0..steps {
        let mut w = matrix.matvec(&basis[k]);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(w, v)| *w -= c * v);
            }
        }
        let b = norm(&w);
        if k + 1 == steps || b < 1e-14 * a.abs().max(1.0) {
            break;
        }
        beta.push(b);
        basis.push(w.into_iter().map(|v| v / b).collect());
    }
    let m = alpha.len();
    let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn identity_in_one_iteration() {
        let (x, stats) = solve_spd(&CsrMatrix::identity(5), &[1.0, 0.0, 0.0, 0.0, 0.0], 1e-12, 10).unwrap();
        assert_eq!(stats.iterations, 1);
        assert_eq!(x, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn two_by_two_hand_solution() {
        let m = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        for solver in [LinearSolver::cg(), LinearSolver::DenseCholesky, LinearSolver::SparseCholesky] {
            let (x, _) = solve(&m, &[1.0, 0.0], &solver).unwrap();
            assert!((x[0] - 2.0 / 3.0).abs() < 1e-12 && (x[1] + 1.0 / 3.0).abs() < 1e-12, "{solver:?}");
        }
    }

    #[test]
    fn solvers_agree_on_laplacian() {
        let n = 200;
        let m = laplace_1d(n);
        let b: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.1).sin()).collect();
        let (dense, _) = solve(&m, &b, &LinearSolver::DenseCholesky).unwrap();
        for solver in [
            LinearSolver::cg(),
            LinearSolver::Cg {
                preconditioner: Preconditioner::IncompleteCholesky,
                rel_tol: 1e-12,
                max_iter: 1000,
            },
            LinearSolver::SparseCholesky,
        ] {
            let (x, stats) = solve(&m, &b, &solver).unwrap();
            let err = x.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-7, "{solver:?}: {err}");
            assert!(stats.residual < 1e-9);
        }
    }

    #[test]
    fn ic0_is_exact_on_tridiagonal() {
        let m = laplace_1d(50);
        let b = vec![1.0; 50];
        let (_, stats) = solve(
            &m,
            &b,
            &LinearSolver::Cg {
                preconditioner: Preconditioner::IncompleteCholesky,
                rel_tol: 1e-12,
                max_iter: 10,
            },
        )
        .unwrap();
        assert!(stats.iterations <= 2);
    }

    #[test]
    fn energy_error_decreases_monotonically() {
        let n = 60;
        let m = laplace_1d(n);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
        let (exact, _) = solve(&m, &b, &LinearSolver::DenseCholesky).unwrap();
        let mut last = f64::INFINITY;
        for it in 1..n {
            let x = partial_cg(&m, &b, it);
            let e: Vec<f64> = x.iter().zip(&exact).map(|(a, b)| a - b).collect();
            let energy = dot(&e, &m.matvec(&e));
            assert!(energy <= last * (1.0 + 1e-12) + 1e-24);
            last = energy;
        }
        let (x, _) = solve_spd(&m, &b, 1e-14, 1000).unwrap();
        let full = partial_cg(&m, &b, n);
        assert!(x.iter().zip(&full).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    // the same recurrence as `pcg`, stopped after a fixed number of steps
    fn partial_cg(m: &CsrMatrix, b: &[f64], iters: usize) -> Vec<f64> {
        let d = m.diagonal();
        let mut x = vec![0.0; b.len()];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&d).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for _ in 0..iters {
            let ap = m.matvec(&p);
            let a = rz / dot(&p, &ap);
            x.iter_mut().zip(&p).for_each(|(x, p)| *x += a * p);
            r.iter_mut().zip(&ap).for_each(|(r, ap)| *r -= a * ap);
            z = r.iter().zip(&d).map(|(r, d)| r / d).collect();
            let rz2 = dot(&r, &z);
            p = z.iter().zip(&p).map(|(z, p)| z + rz2 / rz * p).collect();
            rz = rz2;
        }
        x
    }

    #[test]
    fn preconditioned_residual_history_is_recorded() {
        let m = laplace_1d(30);
        let (_, stats) = solve_spd(&m, &vec![1.0; 30], 1e-10, 100).unwrap();
        assert_eq!(stats.history.len(), stats.iterations);
        assert!(stats.history.last().unwrap() < &1e-8);
    }

    #[test]
    fn indefinite_matrix_breaks_down() {
        let m = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            solve(&m, &[1.0, -1.0], &LinearSolver::cg()),
            Err(SolveError::Breakdown { .. })
        ));
        assert!(matches!(
            solve(&m, &[1.0, -1.0], &LinearSolver::DenseCholesky),
            Err(SolveError::NotPositiveDefinite(_))
        ));
        assert!(solve(&m, &[1.0, -1.0], &LinearSolver::SparseCholesky).is_err());
    }

    #[test]
    fn non_convergence_reports_history() {
        let m = laplace_1d(100);
        match solve_spd(&m, &vec![1.0; 100], 1e-12, 3) {
            Err(SolveError::NotConverged { iterations, history, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lanczos_estimates_smallest_eigenvalue() {
        let n = 20;
        let m = laplace_1d(n);
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let ritz = lanczos_min_ritz(&m, n);
        assert!((ritz - exact).abs() < 1e-10, "{ritz} vs {exact}");
        assert!(lanczos_min_ritz(&m, 5) >= exact - 1e-12);
    }

    #[test]
    fn matrix_market_dump() {
        let m = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let mut out = Vec::new();
        m.write_matrix_market(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("%%MatrixMarket"));
        assert_eq!(text.lines().count(), 2 + 4);
    }
}
