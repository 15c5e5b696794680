//! Small fixed-size vector/matrix helpers shared by the geometry and solver code.
//!
//! Everything is plain `[f64; N]` arrays; the hot rasterizer loops want
//! transparent, allocation-free arithmetic rather than a linear algebra crate.

pub type Vec3 = [f64; 3];

/// Row-major 3x3 matrix.
pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub fn normalize3(a: Vec3) -> Vec3 {
    let n = norm3(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

#[inline]
pub fn mat3_mul_vec3(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// m^T v without materializing the transpose.
#[inline]
pub fn mat3_tmul_vec3(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

/// Rotation about the world Y axis; the convention used by the rotational
/// trajectories (x' = x cos + z sin, z' = -x sin + z cos).
#[inline]
pub fn rot_y(theta: f64) -> Mat3 {
    let (s, c) = theta.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

/// Pairwise (tree) summation of `n` values produced by `f(i)`.
///
/// The reduction order depends only on `n`, which is what makes the image
/// accumulators reproducible across thread counts: every pixel reduces its
/// samples in the same fixed tree regardless of how work was scheduled.
pub fn pairwise_sum<F: Fn(usize) -> f64 + Copy>(n: usize, f: F) -> f64 {
    fn go<F: Fn(usize) -> f64 + Copy>(lo: usize, len: usize, f: F) -> f64 {
        match len {
            0 => 0.0,
            1 => f(lo),
            2 => f(lo) + f(lo + 1),
            _ => {
                let half = len / 2;
                go(lo, half, f) + go(lo + half, len - half, f)
            }
        }
    }
    go(0, n, f)
}

/// Pairwise mean; `n = 0` yields 0.
pub fn pairwise_mean<F: Fn(usize) -> f64 + Copy>(n: usize, f: F) -> f64 {
    if n == 0 {
        0.0
    } else {
        pairwise_sum(n, f) / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_sequential_on_exact_values() {
        let vals: Vec<f64> = (0..37).map(|i| i as f64).collect();
        let s = pairwise_sum(vals.len(), |i| vals[i]);
        assert_eq!(s, 36.0 * 37.0 / 2.0);
    }

    #[test]
    fn rot_y_quarter_turn() {
        let r = rot_y(std::f64::consts::FRAC_PI_2);
        let v = mat3_mul_vec3(&r, [1.0, 0.0, 0.0]);
        assert!((v[0]).abs() < 1e-15 && (v[2] + 1.0).abs() < 1e-15);
        let w = mat3_mul_vec3(&r, [0.0, 0.0, 1.0]);
        assert!((w[0] - 1.0).abs() < 1e-15 && w[2].abs() < 1e-15);
    }

    #[test]
    fn cross_is_right_handed() {
        assert_eq!(cross3([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), [0.0, 0.0, 1.0]);
    }
}
