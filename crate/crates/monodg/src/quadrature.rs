//! Quadrature rules: Gauss-Legendre on segments and tensor-product rules on
//! triangles via the Duffy transform. Polygonal elements are integrated by
//! fanning them into triangles about the centroid; that happens in `dgspace`.

use crate::geometry::Vec2;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
/// Exact for polynomials of degree 2n - 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Nodes are symmetric; solve for the first half by Newton iteration on
    // P_n with the Chebyshev-like initial guess.
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        // One clean-up step so nodes are converged to machine precision.
        let (p, d) = legendre_and_derivative(n, x);
        x -= p / d;
        let w = 2.0 / ((1.0 - x * x) * d * d);
        nodes[i] = -x.abs();
        nodes[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
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

/// A quadrature rule over a planar region: points with matching weights.
#[derive(Clone, Debug, Default)]
pub struct Rule2d {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl Rule2d {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Vec2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// Rule on the reference triangle {(a, b) : a, b >= 0, a + b <= 1}, exact for
/// total degree `order`, built as a Duffy-collapsed tensor Gauss rule. All
/// weights are positive.
pub fn triangle_rule(order: usize) -> Rule2d {
    // The Duffy substitution x = a (1 - b), y = b carries total degree q on
    // the triangle to degree q + 1 in b (Jacobian 1 - b) and degree q in a,
    // so n points per direction with 2n - 1 >= q + 1 suffice.
    let n = (order + 3) / 2;
    let (gn, gw) = gauss_legendre(n);
    // Shift to [0, 1].
    let t: Vec<f64> = gn.iter().map(|&x| 0.5 * (x + 1.0)).collect();
    let w: Vec<f64> = gw.iter().map(|&x| 0.5 * x).collect();
    let mut rule = Rule2d::default();
    for i in 0..n {
        for j in 0..n {
            let a = t[i];
            let b = t[j];
            rule.points.push(Vec2::new(a * (1.0 - b), b));
            rule.weights.push(w[i] * w[j] * (1.0 - b));
        }
    }
    rule
}

/// Map a reference-triangle rule to the physical triangle (v0, v1, v2).
/// Weights are scaled by twice the (unsigned) triangle area so they sum to it.
pub fn map_to_triangle(reference: &Rule2d, v0: Vec2, v1: Vec2, v2: Vec2) -> Rule2d {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let jac = e1.cross(e2).abs();
    let mut out = Rule2d {
        points: Vec::with_capacity(reference.len()),
        weights: Vec::with_capacity(reference.len()),
    };
    for (&p, &w) in reference.points.iter().zip(&reference.weights) {
        out.points.push(v0 + e1 * p.x + e2 * p.y);
        out.weights.push(w * jac);
    }
    out
}

/// Gauss rule along the segment [a, b], weights summing to its length.
pub fn segment_rule(a: Vec2, b: Vec2, n: usize) -> Rule2d {
    let (gn, gw) = gauss_legendre(n);
    let mid = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let len_half = half.norm();
    let mut out = Rule2d {
        points: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
    };
    for (&x, &w) in gn.iter().zip(&gw) {
        out.points.push(mid + half * x);
        out.weights.push(w * len_half);
    }
    out
}
