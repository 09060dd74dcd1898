//! Closed-form solutions and derivatives of the built-in problems.

use std::f64::consts::PI;

use crate::analysis::ExactSolution;
use crate::{Mat2, Point};

/// `u = (1 - r^2) / 4`, the solution of `Laplace u = -1` on the unit disk.
pub struct PoissonDisk;

impl ExactSolution for PoissonDisk {
    fn value(&self, x: Point) -> f64 {
        0.25 * (1.0 - x[0] * x[0] - x[1] * x[1])
    }

    fn gradient(&self, x: Point) -> [f64; 2] {
        [-0.5 * x[0], -0.5 * x[1]]
    }

    fn hessian(&self, _x: Point) -> Mat2 {
        [[-0.5, 0.0], [0.0, -0.5]]
    }
}

/// `u = (1 - r^2) cos(x1 + 2 x2)`.
pub struct LinearCordes;

impl ExactSolution for LinearCordes {
    fn value(&self, x: Point) -> f64 {
        (1.0 - x[0] * x[0] - x[1] * x[1]) * (x[0] + 2.0 * x[1]).cos()
    }

    fn gradient(&self, x: Point) -> [f64; 2] {
        let w = 1.0 - x[0] * x[0] - x[1] * x[1];
        let (s, c) = (x[0] + 2.0 * x[1]).sin_cos();
        [-2.0 * x[0] * c - w * s, -2.0 * x[1] * c - 2.0 * w * s]
    }

    fn hessian(&self, x: Point) -> Mat2 {
        let w = 1.0 - x[0] * x[0] - x[1] * x[1];
        let (s, c) = (x[0] + 2.0 * x[1]).sin_cos();
        let uxx = -2.0 * c + 4.0 * x[0] * s - w * c;
        let uxy = 4.0 * x[0] * s + 2.0 * x[1] * s - 2.0 * w * c;
        let uyy = -2.0 * c + 8.0 * x[1] * s - 4.0 * w * c;
        [[uxx, uxy], [uxy, uyy]]
    }
}

/// `u = -sqrt(R^2 - r^2) + sqrt(R^2 - 1)`, convex with `det D^2 u = R^2 / (R^2 - r^2)^2`.
pub struct SphereCap {
    pub radius: f64,
}

impl SphereCap {
    pub fn source(&self, x: Point) -> f64 {
        let r2 = self.radius * self.radius;
        r2 / (r2 - x[0] * x[0] - x[1] * x[1]).powi(2)
    }
}

impl ExactSolution for SphereCap {
    fn value(&self, x: Point) -> f64 {
        let r2 = self.radius * self.radius;
        -(r2 - x[0] * x[0] - x[1] * x[1]).sqrt() + (r2 - 1.0).sqrt()
    }

    fn gradient(&self, x: Point) -> [f64; 2] {
        let w = (self.radius * self.radius - x[0] * x[0] - x[1] * x[1]).sqrt();
        [x[0] / w, x[1] / w]
    }

    fn hessian(&self, x: Point) -> Mat2 {
        let w = (self.radius * self.radius - x[0] * x[0] - x[1] * x[1]).sqrt();
        let w3 = w * w * w;
        [
            [1.0 / w + x[0] * x[0] / w3, x[0] * x[1] / w3],
            [x[0] * x[1] / w3, 1.0 / w + x[1] * x[1] / w3],
        ]
    }
}

/// `u = r^(5/3) (1 - r)^(5/2) sin(2 phi / 3)^(5/2)` for `0 < phi < 3 pi / 2`
/// and `r < 1`, zero elsewhere, with `phi` in `[0, 2 pi)`.
pub struct ReentrantCorner;

/// Value, gradient and Hessian, all zero off the support and below `r = 1e-14`.
pub fn reentrant_jet(x: Point) -> (f64, [f64; 2], Mat2) {
    let zero = (0.0, [0.0; 2], [[0.0; 2]; 2]);
    let r = x[0].hypot(x[1]);
    if !(1e-14..1.0).contains(&r) {
        return zero;
    }
    let mut phi = x[1].atan2(x[0]);
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    if !(phi > 0.0 && phi < 1.5 * PI) {
        return zero;
    }
    let (s, c) = (2.0 * phi / 3.0).sin_cos();
    let (s12, s32, s52) = (s.sqrt(), s.powf(1.5), s.powf(2.5));
    let th = s52;
    let th1 = 5.0 / 3.0 * s32 * c;
    let th2 = 5.0 / 3.0 * (s12 * c * c - 2.0 / 3.0 * s52);

    let t = 1.0 - r;
    let (r13, r23, r53) = (r.cbrt(), r.powf(2.0 / 3.0), r.powf(5.0 / 3.0));
    let (t12, t32, t52) = (t.sqrt(), t.powf(1.5), t.powf(2.5));
    let rho = r53 * t52;
    let rho1 = 5.0 / 3.0 * r23 * t52 - 2.5 * r53 * t32;
    let rho2 = 10.0 / 9.0 / r13 * t52 - 25.0 / 3.0 * r23 * t32 + 3.75 * r53 * t12;

    let (u_r, u_p) = (rho1 * th, rho * th1);
    let (u_rr, u_rp, u_pp) = (rho2 * th, rho1 * th1, rho * th2);
    let (cp, sp) = (phi.cos(), phi.sin());
    let grad = [u_r * cp - u_p / r * sp, u_r * sp + u_p / r * cp];
    // Hessian in the (e_r, e_phi) frame, rotated to Cartesian
    let h_rr = u_rr;
    let h_rp = u_rp / r - u_p / (r * r);
    let h_pp = u_pp / (r * r) + u_r / r;
    let q = [[cp, -sp], [sp, cp]];
    let hp = [[h_rr, h_rp], [h_rp, h_pp]];
    let mut hess = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    hess[i][j] += q[i][k] * hp[k][l] * q[j][l];
                }
            }
        }
    }
    (rho * th, grad, hess)
}

impl ExactSolution for ReentrantCorner {
    fn value(&self, x: Point) -> f64 {
        reentrant_jet(x).0
    }

    fn gradient(&self, x: Point) -> [f64; 2] {
        reentrant_jet(x).1
    }

    fn hessian(&self, x: Point) -> Mat2 {
        reentrant_jet(x).2
    }
}
