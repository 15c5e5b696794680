//! Analytic motion trajectories over a unit exposure interval t in [0, 1].

use serde::{Deserialize, Serialize};

use crate::math::{mat3_mul_vec3, rot_y, Mat3, Vec3};

fn default_span() -> f64 {
    1.0
}
fn default_turns() -> f64 {
    1.0
}

/// Rigid motion of the whole mesh over the exposure.
///
/// * `translation-x`: x(t) = x0 + span * (0.5 - t), so the object slides from
///   +span/2 to -span/2 around its rest position.
/// * `rotation-y`: rotation about the world Y axis by `turns * 2 pi * t`,
///   with x' = x cos + z sin, z' = -x sin + z cos.
/// * `parabolic-composite`: rotation by pi*t composed with the translation
///   (s, -4 s^2 + 0.5, s) for s = 0.5 - t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MotionTrajectory {
    #[serde(rename = "static")]
    Static,
    #[serde(rename = "translation-x")]
    TranslationX {
        #[serde(default = "default_span")]
        span: f64,
    },
    #[serde(rename = "rotation-y")]
    RotationY {
        #[serde(default = "default_turns")]
        turns: f64,
    },
    #[serde(rename = "parabolic-composite")]
    ParabolicComposite,
}

impl MotionTrajectory {
    /// Exact (non-linearized) position of one rest-pose point at time t.
    #[inline]
    pub fn pose_point(&self, p: Vec3, t: f64) -> Vec3 {
        match *self {
            MotionTrajectory::Static => p,
            MotionTrajectory::TranslationX { span } => {
                [p[0] + span * (0.5 - t), p[1], p[2]]
            }
            MotionTrajectory::RotationY { turns } => {
                mat3_mul_vec3(&rot_y(turns * std::f64::consts::TAU * t), p)
            }
            MotionTrajectory::ParabolicComposite => {
                let r = mat3_mul_vec3(&rot_y(std::f64::consts::PI * t), p);
                let s = 0.5 - t;
                [r[0] + s, r[1] - 4.0 * s * s + 0.5, r[2] + s]
            }
        }
    }

    /// Exact vertex positions for a whole rest pose.
    pub fn pose_at(&self, rest: &[Vec3], t: f64) -> Vec<Vec3> {
        rest.iter().map(|&p| self.pose_point(p, t)).collect()
    }

    /// d(pose point)/d(rest point) at time t; rigid motions make this a
    /// constant rotation (or identity), which the backward pass chains through.
    pub fn pose_jacobian(&self, t: f64) -> Mat3 {
        match *self {
            MotionTrajectory::Static | MotionTrajectory::TranslationX { .. } => {
                [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            }
            MotionTrajectory::RotationY { turns } => rot_y(turns * std::f64::consts::TAU * t),
            MotionTrajectory::ParabolicComposite => rot_y(std::f64::consts::PI * t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translation_is_identity_at_midpoint() {
        let traj = MotionTrajectory::TranslationX { span: 1.0 };
        let p = [0.3, -0.1, 0.7];
        assert_eq!(traj.pose_point(p, 0.5), p);
        // endpoints offset by +-0.5
        assert!((traj.pose_point(p, 0.0)[0] - (p[0] + 0.5)).abs() < 1e-15);
        assert!((traj.pose_point(p, 1.0)[0] - (p[0] - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn full_rotation_is_periodic() {
        let traj = MotionTrajectory::RotationY { turns: 1.0 };
        let p = [0.3, -0.1, 0.7];
        let q = traj.pose_point(p, 1.0);
        for k in 0..3 {
            assert!((q[k] - p[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn parabolic_midpoint_is_quarter_turn_plus_lift() {
        let traj = MotionTrajectory::ParabolicComposite;
        let p = [0.3, -0.1, 0.7];
        let q = traj.pose_point(p, 0.5);
        // rotation by pi/2: x' = z, z' = -x; translation (0, 0.5, 0)
        assert!((q[0] - p[2]).abs() < 1e-15);
        assert!((q[1] - (p[1] + 0.5)).abs() < 1e-15);
        assert!((q[2] - (-p[0])).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let trajs = [
            MotionTrajectory::Static,
            MotionTrajectory::TranslationX { span: 1.0 },
            MotionTrajectory::RotationY { turns: 1.0 },
            MotionTrajectory::ParabolicComposite,
        ];
        let p = [0.2, 0.4, -0.3];
        let h = 1e-6;
        for traj in trajs {
            for t in [0.0, 0.3, 0.77] {
                let jac = traj.pose_jacobian(t);
                for c in 0..3 {
                    let mut pp = p;
                    pp[c] += h;
                    let mut pm = p;
                    pm[c] -= h;
                    let qp = traj.pose_point(pp, t);
                    let qm = traj.pose_point(pm, t);
                    for r in 0..3 {
                        let fd = (qp[r] - qm[r]) / (2.0 * h);
                        assert!(
                            (jac[r][c] - fd).abs() < 1e-9,
                            "{traj:?} t={t} d{r}/d{c}: {} vs {}",
                            jac[r][c],
                            fd
                        );
                    }
                }
            }
        }
    }
}
