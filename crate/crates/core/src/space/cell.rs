use super::reference::{self, MAX_NODES};
use crate::error::{Error, Result};
use crate::mesh::{quadratic_map_jacobian, QuadratureRule, TriangleMesh};
use crate::{Mat2, Point};

/// Geometry of one cell at one reference point.
#[derive(Clone, Copy, Debug)]
pub struct PointMap {
    pub x: Point,
    pub det: f64,
    /// Inverse transpose of `dx/dxi`; maps reference gradients to physical ones.
    pub inv_t: Mat2,
}

/// Evaluates the (iso)parametric map of `cell` at `(xi, eta)`.
pub fn map_point(mesh: &TriangleMesh, cell: usize, xi: f64, eta: f64) -> Result<PointMap> {
    let (x, jac) = if mesh.is_curved(cell) {
        let nodes = mesh.geometry_nodes(cell);
        let (v, _) = reference::shape(2, xi, eta);
        let mut x = [0.0; 2];
        for (n, w) in nodes.iter().zip(v.iter()) {
            x[0] += w * n[0];
            x[1] += w * n[1];
        }
        (x, quadratic_map_jacobian(&nodes, xi, eta))
    } else {
        let [a, b, c] = mesh.cell_points(cell);
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let x = [a[0] + jac[0][0] * xi + jac[0][1] * eta, a[1] + jac[1][0] * xi + jac[1][1] * eta];
        (x, jac)
    };
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    if !(det > 0.0) {
        return Err(Error::DegenerateCell { cell, det });
    }
    let inv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
    Ok(PointMap { x, det, inv_t })
}

pub(crate) fn physical_gradient(inv_t: &Mat2, g: [f64; 2]) -> [f64; 2] {
    [inv_t[0][0] * g[0] + inv_t[0][1] * g[1], inv_t[1][0] * g[0] + inv_t[1][1] * g[1]]
}

/// Shape function values and physical gradients at the quadrature points of
/// one cell. Reference data is computed once; [`CellValues::reinit`] updates
/// the geometric part for each cell.
#[derive(Clone, Debug)]
pub struct CellValues {
    degree: usize,
    n_basis: usize,
    ref_points: Vec<(f64, f64)>,
    ref_weights: Vec<f64>,
    ref_values: Vec<[f64; MAX_NODES]>,
    ref_grads: Vec<[[f64; 2]; MAX_NODES]>,
    pub cell: usize,
    pub points: Vec<Point>,
    /// Quadrature weight times the Jacobian determinant.
    pub jxw: Vec<f64>,
    pub grads: Vec<[[f64; 2]; MAX_NODES]>,
}

impl CellValues {
    pub fn new(degree: usize, rule: &QuadratureRule) -> Self {
        let ref_points: Vec<(f64, f64)> = (0..rule.len()).map(|q| rule.ref_point(q)).collect();
        let (ref_values, ref_grads) = ref_points.iter().map(|&(xi, eta)| reference::shape(degree, xi, eta)).unzip();
        let nq = rule.len();
        Self {
            degree,
            n_basis: reference::n_nodes(degree),
            ref_points,
            ref_weights: rule.weights.clone(),
            ref_values,
            ref_grads,
            cell: usize::MAX,
            points: vec![[0.0; 2]; nq],
            jxw: vec![0.0; nq],
            grads: vec![[[0.0; 2]; MAX_NODES]; nq],
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn n_points(&self) -> usize {
        self.ref_points.len()
    }

    pub fn values(&self, q: usize) -> &[f64; MAX_NODES] {
        &self.ref_values[q]
    }

    pub fn reinit(&mut self, mesh: &TriangleMesh, cell: usize) -> Result<()> {
        self.cell = cell;
        for q in 0..self.n_points() {
            let (xi, eta) = self.ref_points[q];
            let map = map_point(mesh, cell, xi, eta)?;
            self.points[q] = map.x;
            self.jxw[q] = self.ref_weights[q] * map.det;
            for i in 0..self.n_basis {
                self.grads[q][i] = physical_gradient(&map.inv_t, self.ref_grads[q][i]);
            }
        }
        Ok(())
    }
}
