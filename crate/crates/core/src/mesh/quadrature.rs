use crate::error::{Error, Result};

/// Quadrature on the reference triangle `{xi, eta >= 0, xi + eta <= 1}`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub degree: usize,
    /// Barycentric coordinates `(1 - xi - eta, xi, eta)`.
    pub points: Vec<[f64; 3]>,
    /// Weights summing to the reference area 1/2.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Reference coordinates `(xi, eta)` of point `q`.
    pub fn ref_point(&self, q: usize) -> (f64, f64) {
        (self.points[q][1], self.points[q][2])
    }
}

/// Collapsed Gauss-Legendre rule exact for polynomials of total degree `degree`.
///
/// The square `[0,1]^2` is mapped onto the triangle by `xi = s`,
/// `eta = (1 - s) t`; the Jacobian `1 - s` raises the degree in `s` by one.
pub fn quadrature(degree: usize) -> Result<QuadratureRule> {
    if !(1..=10).contains(&degree) {
        return Err(Error::UnsupportedQuadrature(degree));
    }
    let (s_nodes, s_weights) = gauss_legendre((degree + 2).div_ceil(2));
    let (t_nodes, t_weights) = gauss_legendre((degree + 1).div_ceil(2));
    let mut points = Vec::with_capacity(s_nodes.len() * t_nodes.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (s, ws) in s_nodes.iter().zip(&s_weights) {
        for (t, wt) in t_nodes.iter().zip(&t_weights) {
            let xi = *s;
            let eta = (1.0 - s) * t;
            points.push([1.0 - xi - eta, xi, eta]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    Ok(QuadratureRule { degree, points, weights })
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
