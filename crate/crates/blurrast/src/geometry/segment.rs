//! Discretization of an analytic motion into linear screen-space keyframe
//! segments: the geometry the fast solver and rasterizer consume.

use crate::error::{Error, Result};
use crate::geometry::{Camera, Mesh, MotionTrajectory, ScreenVertex};

/// Screen-space keyframes at segment boundaries plus the per-segment sample
/// count. Boundary poses are shared by adjacent segments, so C0 continuity
/// holds by construction.
#[derive(Debug, Clone)]
pub struct SegmentedMotion {
    keyframes: Vec<Vec<ScreenVertex>>,
    pub samples_per_segment: usize,
}

impl SegmentedMotion {
    pub fn n_segments(&self) -> usize {
        self.keyframes.len() - 1
    }

    pub fn n_vertices(&self) -> usize {
        self.keyframes[0].len()
    }

    /// Start/end keyframes of one segment.
    pub fn segment(&self, i: usize) -> (&[ScreenVertex], &[ScreenVertex]) {
        (&self.keyframes[i], &self.keyframes[i + 1])
    }

    pub fn keyframe(&self, boundary: usize) -> &[ScreenVertex] {
        &self.keyframes[boundary]
    }

    /// Global time of a segment boundary.
    pub fn boundary_time(&self, boundary: usize) -> f64 {
        boundary as f64 / self.n_segments() as f64
    }

    /// In-segment sample times: k/(K-1) inclusive of both endpoints, or the
    /// single midpoint sample 0.5 when K = 1.
    pub fn sample_times(&self) -> Vec<f64> {
        sample_times(self.samples_per_segment)
    }

    /// Total number of rendered samples (shared segment endpoints are
    /// rendered once per adjacent segment and both renders enter the mean).
    pub fn total_samples(&self) -> usize {
        self.n_segments() * self.samples_per_segment
    }

    /// Screen position of one vertex inside a segment at local time t.
    pub fn lerp_vertex(&self, seg: usize, vtx: usize, t: f64) -> ScreenVertex {
        let a = self.keyframes[seg][vtx];
        let b = self.keyframes[seg + 1][vtx];
        ScreenVertex {
            x: (1.0 - t) * a.x + t * b.x,
            y: (1.0 - t) * a.y + t * b.y,
            z: (1.0 - t) * a.z + t * b.z,
        }
    }
}

pub fn sample_times(samples_per_segment: usize) -> Vec<f64> {
    if samples_per_segment == 1 {
        vec![0.5]
    } else {
        let k = samples_per_segment;
        (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
    }
}

/// Evaluate the trajectory exactly at the segment boundaries t = i/n and
/// project each boundary pose to screen space. Motion between keyframes is
/// treated as linear by everything downstream.
pub fn segment(
    trajectory: &MotionTrajectory,
    mesh: &Mesh,
    camera: &Camera,
    n_segments: usize,
    samples_per_segment: usize,
) -> Result<SegmentedMotion> {
    if n_segments == 0 {
        return Err(Error::InvalidConfig("n_segments must be >= 1".into()));
    }
    if samples_per_segment == 0 {
        return Err(Error::InvalidConfig("samples_per_segment must be >= 1".into()));
    }
    let mut keyframes = Vec::with_capacity(n_segments + 1);
    for i in 0..=n_segments {
        let t = i as f64 / n_segments as f64;
        let pose = trajectory.pose_at(&mesh.vertices, t);
        keyframes.push(camera.project(&pose)?);
    }
    Ok(SegmentedMotion { keyframes, samples_per_segment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cube, icosphere};

    fn cam() -> Camera {
        Camera::from_spherical(2.232, 0.0, 0.0, 30.0, 128, 128).unwrap()
    }

    /// Camera viewing the x-translation transversally (constant view depth).
    fn side_cam() -> Camera {
        Camera::from_spherical(2.232, 0.0, -90.0, 30.0, 128, 128).unwrap()
    }

    #[test]
    fn first_keyframe_matches_initial_pose() {
        let mesh = cube(0.4);
        let traj = MotionTrajectory::RotationY { turns: 1.0 };
        let sm = segment(&traj, &mesh, &cam(), 12, 5).unwrap();
        let pose0 = cam().project(&traj.pose_at(&mesh.vertices, 0.0)).unwrap();
        for (a, b) in sm.keyframe(0).iter().zip(&pose0) {
            assert!((a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_keyframes_at_thirty_degree_increments() {
        let mesh = icosphere(0);
        let traj = MotionTrajectory::RotationY { turns: 1.0 };
        let sm = segment(&traj, &mesh, &cam(), 12, 5).unwrap();
        assert_eq!(sm.n_segments(), 12);
        // 13 keyframe poses; boundary i corresponds to a rotation of i*30 deg
        for i in 0..=12 {
            let t = i as f64 / 12.0;
            let pose = cam().project(&traj.pose_at(&mesh.vertices, t)).unwrap();
            for (a, b) in sm.keyframe(i).iter().zip(&pose) {
                assert!((a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn static_trajectory_keyframes_identical() {
        let mesh = cube(0.4);
        let sm = segment(&MotionTrajectory::Static, &mesh, &cam(), 7, 3).unwrap();
        for i in 1..=7 {
            for (a, b) in sm.keyframe(i).iter().zip(sm.keyframe(0)) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn sample_placement() {
        assert_eq!(sample_times(1), vec![0.5]);
        assert_eq!(sample_times(2), vec![0.0, 1.0]);
        let t5 = sample_times(5);
        assert_eq!(t5, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn transverse_translation_is_exactly_linear_in_screen_space() {
        // Viewed transversally, the x-translation preserves view depth, so
        // screen-space lerp of keyframes equals projecting the exact pose.
        let mesh = cube(0.4);
        let traj = MotionTrajectory::TranslationX { span: 1.0 };
        let cam = side_cam();
        for n_segments in [1, 4] {
            let sm = segment(&traj, &mesh, &cam, n_segments, 5).unwrap();
            for (seg, tl) in [(0usize, 0.37), (n_segments - 1, 0.81)] {
                let tg = (seg as f64 + tl) / n_segments as f64;
                let exact = cam.project(&traj.pose_at(&mesh.vertices, tg)).unwrap();
                for v in 0..mesh.n_vertices() {
                    let s = sm.lerp_vertex(seg, v, tl);
                    assert!((s.x - exact[v].x).abs() < 1e-9, "{} vs {}", s.x, exact[v].x);
                    assert!((s.y - exact[v].y).abs() < 1e-9);
                    assert!((s.z - exact[v].z).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rotation_chord_error_within_analytic_bound() {
        // chord-vs-arc deviation for a circular arc of half-angle pi/S is
        // bounded by r * (1 - cos(pi/S))
        let mesh = icosphere(1);
        let traj = MotionTrajectory::RotationY { turns: 1.0 };
        let s = 12usize;
        let mut worst = 0.0f64;
        for seg in 0..s {
            for &tl in &[0.25, 0.5, 0.75] {
                let tg = (seg as f64 + tl) / s as f64;
                let exact = traj.pose_at(&mesh.vertices, tg);
                for (v, p) in mesh.vertices.iter().enumerate() {
                    let a = traj.pose_point(*p, seg as f64 / s as f64);
                    let b = traj.pose_point(*p, (seg + 1) as f64 / s as f64);
                    let lerped = [
                        (1.0 - tl) * a[0] + tl * b[0],
                        (1.0 - tl) * a[1] + tl * b[1],
                        (1.0 - tl) * a[2] + tl * b[2],
                    ];
                    let d = crate::math::norm3(crate::math::sub3(lerped, exact[v]));
                    let r = (p[0] * p[0] + p[2] * p[2]).sqrt();
                    let bound = r * (1.0 - (std::f64::consts::PI / s as f64).cos()) + 1e-12;
                    assert!(d <= bound, "vertex {v}: chord deviation {d} > bound {bound}");
                    worst = worst.max(d);
                }
            }
        }
        assert!(worst > 0.0);
    }

    #[test]
    fn zero_segments_rejected() {
        let mesh = cube(0.4);
        assert!(segment(&MotionTrajectory::Static, &mesh, &cam(), 0, 5).is_err());
    }
}
