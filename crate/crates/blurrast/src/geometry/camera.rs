//! Perspective camera and projection to pixel coordinates.
//!
//! Projection follows x_p = x / (z tan(alpha)) with a fixed half-angular
//! field of view alpha; NDC [-1, 1] maps onto the full image, y flipped so
//! row 0 is the top. View-space depth is kept per vertex for Z-buffering.

use crate::error::{Error, Result};
use crate::math::{cross3, dot3, normalize3, sub3, Vec3};

/// Vertices closer than this along the view axis are rejected, not clipped.
pub const NEAR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub eye: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    /// Half-angular field of view in radians, in (0, pi/2).
    pub half_fov: f64,
    pub width: usize,
    pub height: usize,
}

/// One projected vertex: pixel x/y plus view-space depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenVertex {
    pub x: f64,
    pub y: f64,
    /// Distance along the view direction (positive in front of the camera).
    pub z: f64,
}

impl Camera {
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        half_fov: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if !(half_fov > 0.0 && half_fov < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidConfig(format!(
                "half-fov {half_fov} rad outside (0, pi/2)"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("zero image dimension".into()));
        }
        let fwd = sub3(target, eye);
        let f = normalize3(fwd);
        let u = normalize3(up);
        if dot3(f, u).abs() > 1.0 - 1e-9 {
            return Err(Error::InvalidConfig(
                "up vector parallel to view direction".into(),
            ));
        }
        Ok(Camera { eye, target, up: u, half_fov, width, height })
    }

    /// Spherical placement looking at the origin: eye at
    /// (d cos(el) cos(az), d cos(el) sin(az), d sin(el)), up = +Z.
    /// Angles in degrees.
    pub fn from_spherical(
        d: f64,
        elevation_deg: f64,
        azimuth_deg: f64,
        half_fov_deg: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let el = elevation_deg.to_radians();
        let az = azimuth_deg.to_radians();
        let eye = [d * el.cos() * az.cos(), d * el.cos() * az.sin(), d * el.sin()];
        Camera::look_at(
            eye,
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            half_fov_deg.to_radians(),
            width,
            height,
        )
    }

    /// Orthonormal view basis (right, up, forward).
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let f = normalize3(sub3(self.target, self.eye));
        let r = normalize3(cross3(f, self.up));
        let u = cross3(r, f);
        (r, u, f)
    }

    /// World point -> (right, up, forward) view coordinates.
    #[inline]
    pub fn world_to_view(&self, p: Vec3) -> Vec3 {
        let (r, u, f) = self.basis();
        let d = sub3(p, self.eye);
        [dot3(d, r), dot3(d, u), dot3(d, f)]
    }

    /// Project one world point; `Err` if at/behind the near plane.
    pub fn project_point(&self, p: Vec3) -> Result<ScreenVertex> {
        let v = self.world_to_view(p);
        if v[2] <= NEAR_EPS {
            return Err(Error::BehindCamera(vec![0]));
        }
        Ok(self.view_to_screen(v))
    }

    #[inline]
    pub fn view_to_screen(&self, v: Vec3) -> ScreenVertex {
        let ta = self.half_fov.tan();
        let xn = v[0] / (v[2] * ta);
        let yn = v[1] / (v[2] * ta);
        ScreenVertex {
            x: (xn + 1.0) * self.width as f64 / 2.0,
            y: (1.0 - yn) * self.height as f64 / 2.0,
            z: v[2],
        }
    }

    /// Project every vertex; lists all behind-camera indices on failure.
    pub fn project(&self, vertices: &[Vec3]) -> Result<Vec<ScreenVertex>> {
        let (r, u, f) = self.basis();
        let ta = self.half_fov.tan();
        let (hw, hh) = (self.width as f64 / 2.0, self.height as f64 / 2.0);
        let mut behind = Vec::new();
        let mut out = Vec::with_capacity(vertices.len());
        for (i, p) in vertices.iter().enumerate() {
            let d = sub3(*p, self.eye);
            let v = [dot3(d, r), dot3(d, u), dot3(d, f)];
            if v[2] <= NEAR_EPS {
                behind.push(i);
                continue;
            }
            out.push(ScreenVertex {
                x: (v[0] / (v[2] * ta) + 1.0) * hw,
                y: (1.0 - v[1] / (v[2] * ta)) * hh,
                z: v[2],
            });
        }
        if !behind.is_empty() {
            return Err(Error::BehindCamera(behind));
        }
        Ok(out)
    }

    /// d(screen x, screen y)/d(world position): a 2x3 Jacobian used by the
    /// backward pass. The world point must be strictly in front of the camera.
    pub fn projection_jacobian(&self, p: Vec3) -> [[f64; 3]; 2] {
        let (r, u, f) = self.basis();
        let d = sub3(p, self.eye);
        let v = [dot3(d, r), dot3(d, u), dot3(d, f)];
        let ta = self.half_fov.tan();
        let (hw, hh) = (self.width as f64 / 2.0, self.height as f64 / 2.0);
        // screen x = hw * (vx / (vz ta) + 1); screen y = hh * (1 - vy / (vz ta))
        let dxd = [hw / (v[2] * ta), 0.0, -hw * v[0] / (v[2] * v[2] * ta)];
        let dyd = [0.0, -hh / (v[2] * ta), hh * v[1] / (v[2] * v[2] * ta)];
        // chain through the view rotation: d(view)/d(world) rows are r, u, f
        let mut jac = [[0.0; 3]; 2];
        for c in 0..3 {
            jac[0][c] = dxd[0] * r[c] + dxd[1] * u[c] + dxd[2] * f[c];
            jac[1][c] = dyd[0] * r[c] + dyd[1] * u[c] + dyd[2] * f[c];
        }
        jac
    }
}
