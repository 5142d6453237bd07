//! Planar geometry primitives: points/vectors, symmetric 2x2 tensors and
//! polygon operations used by the mesh generator and the quadrature layer.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// A point or vector in the plane. The same type is used for both; context
/// makes the distinction clear and keeps the API small.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product, i.e. the signed parallelogram area.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Symmetric 2x2 tensor, used for region conductivities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymTensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor2 {
    pub fn isotropic(s: f64) -> Self {
        SymTensor2 { xx: s, xy: 0.0, yy: s }
    }

    /// Tensor with eigenvalue `along` in direction `dir` (normalized
    /// internally) and `across` in the orthogonal direction:
    /// `along * d d^T + across * (I - d d^T)`.
    pub fn from_direction(along: f64, across: f64, dir: Vec2) -> Self {
        let d = dir.normalized();
        SymTensor2 {
            xx: along * d.x * d.x + across * d.y * d.y,
            xy: (along - across) * d.x * d.y,
            yy: along * d.y * d.y + across * d.x * d.x,
        }
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    pub fn largest_eigenvalue(self) -> f64 {
        let mean = 0.5 * (self.xx + self.yy);
        let disc = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        mean + disc
    }

    /// Quadratic form d^T S d.
    pub fn quad_form(self, d: Vec2) -> f64 {
        d.dot(self.apply(d))
    }
}

/// Signed area of a polygon (positive for counter-clockwise orientation).
pub fn polygon_signed_area(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        acc += a.cross(b);
    }
    0.5 * acc
}

/// Area centroid of a simple polygon. Requires nonzero area.
pub fn polygon_centroid(pts: &[Vec2]) -> Vec2 {
    let n = pts.len();
    let mut area = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let w = a.cross(b);
        area += w;
        cx += (a.x + b.x) * w;
        cy += (a.y + b.y) * w;
    }
    let area = 0.5 * area;
    Vec2::new(cx / (6.0 * area), cy / (6.0 * area))
}

/// Diameter: largest pairwise vertex distance.
pub fn polygon_diameter(pts: &[Vec2]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            d = d.max(pts[i].dist(pts[j]));
        }
    }
    d
}

/// Even-odd crossing test; points exactly on an edge count as inside.
pub fn point_in_polygon(p: Vec2, pts: &[Vec2]) -> bool {
    let n = pts.len();
    let mut inside = false;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        // On-edge check: collinear and within the segment's bounding box.
        let cross = (b - a).cross(p - a);
        if cross.abs() < 1e-14 * (b - a).norm().max(1.0)
            && p.x >= a.x.min(b.x) - 1e-14
            && p.x <= a.x.max(b.x) + 1e-14
            && p.y >= a.y.min(b.y) - 1e-14
            && p.y <= a.y.max(b.y) + 1e-14
        {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            if p.x < a.x + t * (b.x - a.x) {
                inside = !inside;
            }
        }
    }
    inside
}

/// Clip a convex polygon against the half-plane `{ x : (x - o) . n <= 0 }`
/// (points with positive component along `n` relative to `o` are cut away).
/// Returns an empty polygon when nothing survives.
pub fn clip_convex_by_halfplane(pts: &[Vec2], o: Vec2, n: Vec2) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(pts.len() + 1);
    let len = pts.len();
    for i in 0..len {
        let a = pts[i];
        let b = pts[(i + 1) % len];
        let da = (a - o).dot(n);
        let db = (b - o).dot(n);
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.x0, self.y0),
            Vec2::new(self.x1, self.y0),
            Vec2::new(self.x1, self.y1),
            Vec2::new(self.x0, self.y1),
        ]
    }
}
