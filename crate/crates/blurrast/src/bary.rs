//! Barycentric solvers for triangles under linear screen-space motion.
//!
//! The classical route solves F w = p per frame through the adjugate and
//! determinant of the instantaneous triangle matrix. The fast route
//! precomputes, per pixel/triangle-pair, the coefficients of
//!
//!   w(t) = (A1 t^2 + A2 t + A3) / (a1 t^2 + a2 t + a3)
//!
//! after which each additional time sample costs one quadratic evaluation
//! and a divide instead of a full solve. Both routes are kept: the per-frame
//! solve doubles as the oracle and as the benchmark baseline.
//!
//! All solver math is in f64: the coefficient formulas subtract nearly equal
//! products and f32 fails the equivalence bound under stress.

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

/// Triangles with |det| at or below this (pixel^2 units) are degenerate and
/// the face is skipped for that sample.
pub const DEGENERACY_EPS: f64 = 1e-10;

/// 2D screen triangle; columns of the 3x3 matrix form with an implicit
/// homogeneous row of ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle2 {
    pub x: [f64; 3],
    pub y: [f64; 3],
}

impl Triangle2 {
    #[inline]
    pub fn det(&self) -> f64 {
        let (x, y) = (&self.x, &self.y);
        x[0] * (y[1] - y[2]) - x[1] * (y[0] - y[2]) + x[2] * (y[0] - y[1])
    }

    /// Point at given barycentric weights.
    #[inline]
    pub fn point(&self, w: Vec3) -> [f64; 2] {
        [
            w[0] * self.x[0] + w[1] * self.x[1] + w[2] * self.x[2],
            w[0] * self.y[0] + w[1] * self.y[1] + w[2] * self.y[2],
        ]
    }
}

/// Start/end keyframes of one face within one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrianglePair {
    pub start: Triangle2,
    pub end: Triangle2,
}

impl TrianglePair {
    /// Instantaneous triangle under linear vertex motion.
    #[inline]
    pub fn at(&self, t: f64) -> Triangle2 {
        let s = 1.0 - t;
        Triangle2 {
            x: [
                s * self.start.x[0] + t * self.end.x[0],
                s * self.start.x[1] + t * self.end.x[1],
                s * self.start.x[2] + t * self.end.x[2],
            ],
            y: [
                s * self.start.y[0] + t * self.end.y[0],
                s * self.start.y[1] + t * self.end.y[1],
                s * self.start.y[2] + t * self.end.y[2],
            ],
        }
    }

    /// Endpoint keyframe selector: 0 when t is closer to the start
    /// (t <= 0.5), 1 otherwise.
    #[inline]
    pub fn endpoint(&self, t: f64) -> &Triangle2 {
        if endpoint_select(t) == 0 {
            &self.start
        } else {
            &self.end
        }
    }
}

#[inline]
pub fn endpoint_select(t: f64) -> usize {
    if t <= 0.5 {
        0
    } else {
        1
    }
}

/// Classical per-frame solve w = adj(F) p / det(F).
pub fn naive_bary(tri: &Triangle2, p: [f64; 2]) -> Result<Vec3> {
    let det = tri.det();
    if det.abs() <= DEGENERACY_EPS {
        return Err(Error::DegenerateTriangle { det });
    }
    let (x, y) = (&tri.x, &tri.y);
    let (u, v) = (p[0], p[1]);
    let n0 = (y[1] - y[2]) * u + (x[2] - x[1]) * v + (x[1] * y[2] - x[2] * y[1]);
    let n1 = (y[2] - y[0]) * u + (x[0] - x[2]) * v + (x[2] * y[0] - x[0] * y[2]);
    let n2 = (y[0] - y[1]) * u + (x[1] - x[0]) * v + (x[0] * y[1] - x[1] * y[0]);
    Ok([n0 / det, n1 / det, n2 / det])
}

/// Precomputed per-(pixel, triangle-pair) rational-quadratic coefficients.
/// `num_t2/num_t1/num_t0` are the paper's A1/A2/A3; `den_t2/den_t1/den_t0`
/// are a1/a2/a3. Componentwise sums of the numerator coefficients equal the
/// denominator coefficients, den_t0 = det(start), and the three denominator
/// coefficients sum to det(end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaryCoeffs {
    pub num_t2: Vec3,
    pub num_t1: Vec3,
    pub num_t0: Vec3,
    pub den_t2: f64,
    pub den_t1: f64,
    pub den_t0: f64,
}

impl BaryCoeffs {
    #[inline]
    pub fn den_at(&self, t: f64) -> f64 {
        (self.den_t2 * t + self.den_t1) * t + self.den_t0
    }
}

/// Closed-form coefficient precomputation in the keyframe coordinates and
/// the pixel position (u, v). Done once per pixel/pair; every sample after
/// that is an `eval_bary` call.
///
/// The coefficients are evaluated in displacement form (keyframe deltas
/// first) rather than the fully expanded polynomials: algebraically
/// identical, but a static pair then yields exactly zero quadratic and
/// linear coefficients, and cancellation between nearly equal products is
/// avoided. The expanded form is kept in the tests as a cross-check.
pub fn precompute_coeffs(pair: &TrianglePair, p: [f64; 2]) -> BaryCoeffs {
    FaceMotionPoly::new(pair).coeffs_for_pixel(p[0], p[1])
}

/// Evaluate the rational form at one time sample.
pub fn eval_bary(coeffs: &BaryCoeffs, t: f64) -> Result<Vec3> {
    let den = coeffs.den_at(t);
    if den.abs() <= DEGENERACY_EPS {
        return Err(Error::DegenerateAtT { t, den });
    }
    Ok([
        ((coeffs.num_t2[0] * t + coeffs.num_t1[0]) * t + coeffs.num_t0[0]) / den,
        ((coeffs.num_t2[1] * t + coeffs.num_t1[1]) * t + coeffs.num_t0[1]) / den,
        ((coeffs.num_t2[2] * t + coeffs.num_t1[2]) * t + coeffs.num_t0[2]) / den,
    ])
}

/// Clamp possibly-outside weights to the closest point of the triangle.
///
/// An exterior point's closest triangle point lies on an edge; each edge
/// projection parameter is
/// t = ((u-xi)(xj-xi) + (v-yi)(yj-yi)) / ((xj-xi)^2 + (yj-yi)^2),
/// clamped to [0, 1], and the nearest of the three candidates wins.
pub fn closest_weights(tri: &Triangle2, w: Vec3) -> Result<Vec3> {
    let det = tri.det();
    if det.abs() <= DEGENERACY_EPS {
        return Err(Error::DegenerateTriangle { det });
    }
    if w.iter().all(|&c| (0.0..=1.0).contains(&c)) {
        return Ok(w);
    }
    let [u, v] = tri.point(w);
    let mut best = [0.0; 3];
    let mut best_d = f64::INFINITY;
    for (i, j) in [(0usize, 1usize), (1, 2), (2, 0)] {
        let (xi, yi) = (tri.x[i], tri.y[i]);
        let (dx, dy) = (tri.x[j] - xi, tri.y[j] - yi);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((u - xi) * dx + (v - yi) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (px, py) = (xi + t * dx, yi + t * dy);
        let d = (u - px) * (u - px) + (v - py) * (v - py);
        if d < best_d {
            best_d = d;
            best = [0.0; 3];
            best[i] = 1.0 - t;
            best[j] = t;
        }
    }
    Ok(best)
}

/// Per-(face, segment) polynomial of the adjugate matrix and determinant:
/// adj(F(t)) = adj0 + adj1 t + adj2 t^2, det(F(t)) = den[0] + den[1] t + den[2] t^2.
///
/// These depend only on the keyframes, not the pixel, so the renderer
/// computes them once per face per segment; the pixel-specific numerator
/// coefficients are then adj_k * (u, v, 1), and the backward pass reuses the
/// same matrices for adj(F(t))^T g.
#[derive(Debug, Clone, Copy)]
pub struct FaceMotionPoly {
    pub adj: [Mat3; 3],
    pub den: [f64; 3],
}

impl FaceMotionPoly {
    pub fn new(pair: &TrianglePair) -> Self {
        let xa = &pair.start.x;
        let ya = &pair.start.y;
        let dx = [
            pair.end.x[0] - xa[0],
            pair.end.x[1] - xa[1],
            pair.end.x[2] - xa[2],
        ];
        let dy = [
            pair.end.y[0] - ya[0],
            pair.end.y[1] - ya[1],
            pair.end.y[2] - ya[2],
        ];
        let mut adj = [[[0.0; 3]; 3]; 3];
        for k in 0..3 {
            let i = (k + 1) % 3;
            let j = (k + 2) % 3;
            // column 0: y_i(t) - y_j(t); column 1: x_j(t) - x_i(t); both linear
            adj[0][k][0] = ya[i] - ya[j];
            adj[1][k][0] = dy[i] - dy[j];
            adj[0][k][1] = xa[j] - xa[i];
            adj[1][k][1] = dx[j] - dx[i];
            // column 2: x_i(t) y_j(t) - x_j(t) y_i(t); quadratic
            adj[0][k][2] = xa[i] * ya[j] - xa[j] * ya[i];
            adj[1][k][2] = xa[i] * dy[j] + dx[i] * ya[j] - xa[j] * dy[i] - dx[j] * ya[i];
            adj[2][k][2] = dx[i] * dy[j] - dx[j] * dy[i];
        }
        // det expands along the row of ones: the sum of the third adjugate column
        let den = [
            adj[0][0][2] + adj[0][1][2] + adj[0][2][2],
            adj[1][0][2] + adj[1][1][2] + adj[1][2][2],
            adj[2][0][2] + adj[2][1][2] + adj[2][2][2],
        ];
        FaceMotionPoly { adj, den }
    }

    #[inline]
    pub fn den_at(&self, t: f64) -> f64 {
        (self.den[2] * t + self.den[1]) * t + self.den[0]
    }

    /// Pixel-specific rational coefficients: A_k = adj_k (u, v, 1)^T.
    #[inline]
    pub fn coeffs_for_pixel(&self, u: f64, v: f64) -> BaryCoeffs {
        let row = |m: &Mat3, k: usize| m[k][0] * u + m[k][1] * v + m[k][2];
        BaryCoeffs {
            num_t2: [row(&self.adj[2], 0), row(&self.adj[2], 1), row(&self.adj[2], 2)],
            num_t1: [row(&self.adj[1], 0), row(&self.adj[1], 1), row(&self.adj[1], 2)],
            num_t0: [row(&self.adj[0], 0), row(&self.adj[0], 1), row(&self.adj[0], 2)],
            den_t2: self.den[2],
            den_t1: self.den[1],
            den_t0: self.den[0],
        }
    }

    /// adj(F(t))^T g, the quantity the backward pass divides by det(F(t))
    /// to solve F(t)^T lambda = g.
    #[inline]
    pub fn adj_transpose_mul(&self, t: f64, g: Vec3) -> Vec3 {
        let tm = |m: &Mat3| {
            [
                m[0][0] * g[0] + m[1][0] * g[1] + m[2][0] * g[2],
                m[0][1] * g[0] + m[1][1] * g[1] + m[2][1] * g[2],
                m[0][2] * g[0] + m[1][2] * g[1] + m[2][2] * g[2],
            ]
        };
        let (m0, m1, m2) = (tm(&self.adj[0]), tm(&self.adj[1]), tm(&self.adj[2]));
        [
            (m2[0] * t + m1[0]) * t + m0[0],
            (m2[1] * t + m1[1]) * t + m0[1],
            (m2[2] * t + m1[2]) * t + m0[2],
        ]
    }
}
