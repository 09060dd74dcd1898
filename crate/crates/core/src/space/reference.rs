//! Lagrange shape functions on the reference triangle.
//!
//! Local node order: vertices 0, 1, 2, then (for degree 2) the midpoints of the
//! edges opposite vertex 0, 1, 2. Barycentric coordinates are
//! `l0 = 1 - xi - eta`, `l1 = xi`, `l2 = eta`.

pub const MAX_NODES: usize = 6;

const BARY_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

pub fn n_nodes(degree: usize) -> usize {
    match degree {
        1 => 3,
        2 => 6,
        _ => unreachable!("degree checked at space construction"),
    }
}

/// Reference coordinates of the local nodes.
pub fn node_points(degree: usize) -> &'static [(f64, f64)] {
    const P1: [(f64, f64); 3] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
    const P2: [(f64, f64); 6] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.5, 0.5), (0.0, 0.5), (0.5, 0.0)];
    match degree {
        1 => &P1,
        _ => &P2,
    }
}

/// Values and reference gradients of the shape functions at `(xi, eta)`.
pub fn shape(degree: usize, xi: f64, eta: f64) -> ([f64; MAX_NODES], [[f64; 2]; MAX_NODES]) {
    let l = [1.0 - xi - eta, xi, eta];
    let mut val = [0.0; MAX_NODES];
    let mut grad = [[0.0; 2]; MAX_NODES];
    match degree {
        1 => {
            val[..3].copy_from_slice(&l);
            grad[..3].copy_from_slice(&BARY_GRAD);
        }
        2 => {
            for i in 0..3 {
                val[i] = l[i] * (2.0 * l[i] - 1.0);
                let s = 4.0 * l[i] - 1.0;
                grad[i] = [s * BARY_GRAD[i][0], s * BARY_GRAD[i][1]];
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                val[3 + i] = 4.0 * l[j] * l[k];
                grad[3 + i] = [
                    4.0 * (BARY_GRAD[j][0] * l[k] + l[j] * BARY_GRAD[k][0]),
                    4.0 * (BARY_GRAD[j][1] * l[k] + l[j] * BARY_GRAD[k][1]),
                ];
            }
        }
        _ => unreachable!("degree checked at space construction"),
    }
    (val, grad)
}

pub(crate) fn p2_gradients(xi: f64, eta: f64) -> [[f64; 2]; MAX_NODES] {
    shape(2, xi, eta).1
}

pub fn inside_reference(xi: f64, eta: f64) -> bool {
    const TOL: f64 = 1e-12;
    xi >= -TOL && eta >= -TOL && xi + eta <= 1.0 + TOL
}
