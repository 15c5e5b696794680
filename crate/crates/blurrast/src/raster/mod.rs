//! Forward soft rasterization of time samples and their accumulation into a
//! motion-blurred RGBA image.
//!
//! Foreground pixels (covered by at least one face) take the Z-buffer
//! winner's barycentric-interpolated vertex color with alpha 1; background
//! pixels aggregate a soft coverage probability exp(-d/delta) over nearby
//! faces as 1 - prod(1 - A). Color aggregation across faces is disabled:
//! background rgb stays zero and only alpha is soft, so partial transparency
//! in the blurred image comes purely from temporal averaging.

mod io;
pub(crate) mod kernel;

use serde::{Deserialize, Serialize};

use crate::bary::{Triangle2, TrianglePair, DEGENERACY_EPS};
use crate::error::{Error, Result};
use crate::geometry::{segment, Camera, Mesh, MotionTrajectory, ScreenVertex, SegmentedMotion};
use crate::math::{pairwise_mean, Vec3};
pub use io::{load_rgba, read_rfi, write_rfi, RFI_MAGIC};
use kernel::{
    build_bands, build_bands_naive, inside01, prep_naive_frame, prep_segment,
    render_frame_naive, render_segment_fast_mean, KernelCtx, PixelSamples,
};

/// Coverage probabilities below this floor are culled; the derived cutoff
/// distance satisfies exp(-cutoff^2 kappa) = KERNEL_FLOOR.
pub const KERNEL_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Fast,
    Naive,
}

/// Soft rasterizer configuration. `delta` is the kernel bandwidth in
/// normalized screen coordinates (the image mapped to [-1, 1]); distances
/// computed in pixel units are converted through (2 / width)^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterConfig {
    pub width: usize,
    pub height: usize,
    pub delta: f64,
    /// When false, the coverage cutoff is disabled and every face can
    /// contribute to every background pixel (oracle-test mode).
    pub cull: bool,
    pub solver: Solver,
}

impl RasterConfig {
    pub fn new(width: usize, height: usize) -> Self {
        RasterConfig { width, height, delta: 1e-4, cull: true, solver: Solver::Fast }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        assert!(delta > 0.0, "delta must be positive");
        self.delta = delta;
        self
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn without_cull(mut self) -> Self {
        self.cull = false;
        self
    }

    /// Squared-pixel-distance kernel factor: A = exp(-d_px^2 * kappa).
    #[inline]
    pub fn kappa(&self) -> f64 {
        let s = 2.0 / self.width as f64;
        s * s / self.delta
    }

    /// Kernel bandwidth expressed in squared pixels.
    #[inline]
    pub fn delta_px(&self) -> f64 {
        1.0 / self.kappa()
    }

    /// Cutoff radius in pixels (infinite when culling is disabled).
    #[inline]
    pub fn cutoff_px(&self) -> f64 {
        if self.cull {
            (self.delta_px() * (1.0 / KERNEL_FLOOR).ln()).sqrt()
        } else {
            f64::INFINITY
        }
    }
}

/// One rendered time sample.
#[derive(Debug, Clone)]
pub struct FrameSample {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<Vec3>,
    pub alpha: Vec<f64>,
    /// Z-buffer winner per pixel; None where uncovered (rgb is 0 there).
    pub zchosen: Vec<Option<u32>>,
}

/// Accumulated motion-blurred image: the uniform mean over all segments'
/// sample means.
#[derive(Debug, Clone)]
pub struct BlurFrame {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<Vec3>,
    pub alpha: Vec<f64>,
    pub n_segments: usize,
    pub samples_per_segment: usize,
}

impl BlurFrame {
    pub fn total_samples(&self) -> usize {
        self.n_segments * self.samples_per_segment
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Upstream image-space gradients seeding the reverse pass.
#[derive(Debug, Clone)]
pub struct PixelAdjoint {
    pub width: usize,
    pub height: usize,
    pub d_rgb: Vec<Vec3>,
    pub d_alpha: Vec<f64>,
}

impl PixelAdjoint {
    pub fn zeros(width: usize, height: usize) -> Self {
        PixelAdjoint {
            width,
            height,
            d_rgb: vec![[0.0; 3]; width * height],
            d_alpha: vec![0.0; width * height],
        }
    }
}

/// A complete renderable scene; the unit consumed by the CLI and optimizer.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: Mesh,
    pub camera: Camera,
    pub trajectory: MotionTrajectory,
    pub n_segments: usize,
    pub samples_per_segment: usize,
    pub config: RasterConfig,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.camera.width != self.config.width || self.camera.height != self.config.height {
            return Err(Error::InvalidConfig("camera and raster image sizes differ".into()));
        }
        Ok(())
    }

    pub fn segmented(&self) -> Result<SegmentedMotion> {
        segment(
            &self.trajectory,
            &self.mesh,
            &self.camera,
            self.n_segments,
            self.samples_per_segment,
        )
    }

    pub fn render(&self) -> Result<BlurFrame> {
        self.validate()?;
        Ok(render_blur(&self.segmented()?, &self.mesh, &self.config))
    }
}

/// Render one time sample of one segment.
pub fn render_sample(
    sm: &SegmentedMotion,
    seg: usize,
    t: f64,
    mesh: &Mesh,
    config: &RasterConfig,
) -> FrameSample {
    assert!(seg < sm.n_segments(), "segment index out of range");
    assert!((0.0..=1.0).contains(&t), "sample time outside [0, 1]");
    let (w, h) = (config.width, config.height);
    let preps = prep_segment(sm, seg, mesh);
    let mut rgb = vec![[0.0f64; 3]; w * h];
    let mut alpha = vec![0.0f64; w * h];
    let mut zface = vec![u32::MAX; w * h];
    match config.solver {
        Solver::Fast => {
            let ts = [t];
            let bands = build_bands(&preps, h, config.cutoff_px(), true);
            let ctx = KernelCtx {
                preps: &preps,
                colors: &mesh.colors,
                ts: &ts,
                width: w,
                height: h,
                kappa: config.kappa(),
                cutoff_px: config.cutoff_px(),
            };
            let mut px = PixelSamples::new(1);
            for r in 0..h {
                let bin = &bands.bins[r / kernel::BAND_ROWS];
                for c in 0..w {
                    kernel::eval_pixel_fast(&ctx, bin, c as f64 + 0.5, r as f64 + 0.5, &mut px);
                    let i = r * w + c;
                    rgb[i] = px.rgb_at(&ctx, 0);
                    alpha[i] = px.alpha[0];
                    zface[i] = px.winner[0];
                }
            }
        }
        Solver::Naive => {
            let faces = prep_naive_frame(&preps, t);
            let bands = build_bands_naive(&faces, h, config.cutoff_px());
            render_frame_naive(
                &faces,
                &bands,
                &mesh.colors,
                w,
                h,
                config.kappa(),
                config.cutoff_px(),
                &mut rgb,
                &mut alpha,
                Some(&mut zface),
            );
        }
    }
    FrameSample {
        width: w,
        height: h,
        rgb,
        alpha,
        zchosen: zface.into_iter().map(|f| (f != u32::MAX).then_some(f)).collect(),
    }
}

/// Render a static pose with the per-frame path: the exact-pose reference
/// used by segmentation-quality comparisons and benchmark verification.
pub fn render_pose_naive(screen: &[ScreenVertex], mesh: &Mesh, config: &RasterConfig) -> FrameSample {
    let preps: Vec<_> = mesh
        .faces
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let tri = Triangle2 {
                x: [screen[f[0]].x, screen[f[1]].x, screen[f[2]].x],
                y: [screen[f[0]].y, screen[f[1]].y, screen[f[2]].y],
            };
            kernel::FacePrep::from_pair_z(
                i,
                *f,
                TrianglePair { start: tri, end: tri },
                [screen[f[0]].z, screen[f[1]].z, screen[f[2]].z],
                [screen[f[0]].z, screen[f[1]].z, screen[f[2]].z],
            )
        })
        .collect();
    let (w, h) = (config.width, config.height);
    let faces = prep_naive_frame(&preps, 0.0);
    let bands = build_bands_naive(&faces, h, config.cutoff_px());
    let mut rgb = vec![[0.0f64; 3]; w * h];
    let mut alpha = vec![0.0f64; w * h];
    let mut zface = vec![u32::MAX; w * h];
    render_frame_naive(
        &faces,
        &bands,
        &mesh.colors,
        w,
        h,
        config.kappa(),
        config.cutoff_px(),
        &mut rgb,
        &mut alpha,
        Some(&mut zface),
    );
    FrameSample {
        width: w,
        height: h,
        rgb,
        alpha,
        zchosen: zface.into_iter().map(|f| (f != u32::MAX).then_some(f)).collect(),
    }
}

/// Accumulate the full blur: segment sample means (pairwise tree per pixel)
/// then the uniform mean across segments, in segment-major order.
pub fn render_blur(sm: &SegmentedMotion, mesh: &Mesh, config: &RasterConfig) -> BlurFrame {
    let (w, h) = (config.width, config.height);
    let n_px = w * h;
    let s = sm.n_segments();
    let ts = sm.sample_times();
    let mut seg_rgb: Vec<Vec<Vec3>> = Vec::with_capacity(s);
    let mut seg_alpha: Vec<Vec<f64>> = Vec::with_capacity(s);

    for seg in 0..s {
        let preps = prep_segment(sm, seg, mesh);
        let mut rgb = vec![[0.0f64; 3]; n_px];
        let mut alpha = vec![0.0f64; n_px];
        match config.solver {
            Solver::Fast => {
                let bands = build_bands(&preps, h, config.cutoff_px(), true);
                let ctx = KernelCtx {
                    preps: &preps,
                    colors: &mesh.colors,
                    ts: &ts,
                    width: w,
                    height: h,
                    kappa: config.kappa(),
                    cutoff_px: config.cutoff_px(),
                };
                render_segment_fast_mean(&ctx, &bands, &mut rgb, &mut alpha);
            }
            Solver::Naive => {
                let k = ts.len();
                let mut frames: Vec<(Vec<Vec3>, Vec<f64>)> = Vec::with_capacity(k);
                for &t in &ts {
                    let faces = prep_naive_frame(&preps, t);
                    let bands = build_bands_naive(&faces, h, config.cutoff_px());
                    let mut frgb = vec![[0.0f64; 3]; n_px];
                    let mut falpha = vec![0.0f64; n_px];
                    render_frame_naive(
                        &faces,
                        &bands,
                        &mesh.colors,
                        w,
                        h,
                        config.kappa(),
                        config.cutoff_px(),
                        &mut frgb,
                        &mut falpha,
                        None,
                    );
                    frames.push((frgb, falpha));
                }
                for i in 0..n_px {
                    for ch in 0..3 {
                        rgb[i][ch] = pairwise_mean(k, |j| frames[j].0[i][ch]);
                    }
                    alpha[i] = pairwise_mean(k, |j| frames[j].1[i]);
                }
            }
        }
        seg_rgb.push(rgb);
        seg_alpha.push(alpha);
    }

    let mut rgb = vec![[0.0f64; 3]; n_px];
    let mut alpha = vec![0.0f64; n_px];
    for i in 0..n_px {
        for ch in 0..3 {
            rgb[i][ch] = pairwise_mean(s, |j| seg_rgb[j][i][ch]);
        }
        alpha[i] = pairwise_mean(s, |j| seg_alpha[j][i]);
    }
    BlurFrame {
        width: w,
        height: h,
        rgb,
        alpha,
        n_segments: s,
        samples_per_segment: sm.samples_per_segment,
    }
}

/// Time-dependent coverage probability of a moving face for one pixel, with
/// the closest-weight selection evaluated on the endpoint keyframe F(X)
/// (X = 0 for t <= 0.5, else 1) and the distance on the true interpolated
/// triangle. Exact at segment endpoints and whenever the pair is static.
/// A degenerate selection contributes nothing (returns 0).
pub fn coverage_prob(pair: &TrianglePair, p: [f64; 2], w_t: Vec3, t: f64, delta_px: f64) -> f64 {
    if inside01(&w_t) {
        return 1.0;
    }
    let prep = kernel::FacePrep::from_pair_z(0, [0, 1, 2], *pair, [1.0; 3], [1.0; 3]);
    let (d_sq, _, _) = kernel::approx_background_geom(&prep, p[0], p[1], &w_t, t);
    (-d_sq / delta_px).exp()
}

/// Exact counterpart: closest point taken on the interpolated triangle
/// itself. This is the oracle the endpoint approximation is tested against.
pub fn coverage_prob_exact(pair: &TrianglePair, p: [f64; 2], t: f64, delta_px: f64) -> f64 {
    let tri = pair.at(t);
    if let Ok(w) = crate::bary::naive_bary(&tri, p) {
        if inside01(&w) {
            return 1.0;
        }
    }
    let (d_sq, _, _) = kernel::exact_background_geom(&tri, p[0], p[1]);
    (-d_sq / delta_px).exp()
}

/// Z-buffer selection among candidate faces covering one pixel: smallest
/// barycentric-interpolated view depth wins, ties to the lower face index.
pub fn zbuffer_select(candidates: &[(usize, Vec3, [f64; 3])]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (face, w, z) in candidates {
        let depth = w[0] * z[0] + w[1] * z[1] + w[2] * z[2];
        let better = match best {
            None => true,
            Some((bf, bd)) => depth < bd || (depth == bd && *face < bf),
        };
        if better {
            best = Some((*face, depth));
        }
    }
    best.map(|(f, _)| f)
}

/// Faces whose swept bounding box, dilated by `cutoff_px`, contains the
/// pixel: a superset of every face with coverage or above-floor background
/// influence at any time in the segment.
pub fn candidate_faces(pairs: &[TrianglePair], p: [f64; 2], cutoff_px: f64) -> Vec<usize> {
    pairs
        .iter()
        .enumerate()
        .filter(|(_, pair)| {
            if !cutoff_px.is_finite() {
                return true;
            }
            let min = |a: f64, b: f64| a.min(b);
            let max = |a: f64, b: f64| a.max(b);
            let xs = [
                pair.start.x[0], pair.start.x[1], pair.start.x[2],
                pair.end.x[0], pair.end.x[1], pair.end.x[2],
            ];
            let ys = [
                pair.start.y[0], pair.start.y[1], pair.start.y[2],
                pair.end.y[0], pair.end.y[1], pair.end.y[2],
            ];
            let (x0, x1) = (xs.iter().copied().fold(f64::INFINITY, min), xs.iter().copied().fold(f64::NEG_INFINITY, max));
            let (y0, y1) = (ys.iter().copied().fold(f64::INFINITY, min), ys.iter().copied().fold(f64::NEG_INFINITY, max));
            p[0] >= x0 - cutoff_px && p[0] <= x1 + cutoff_px && p[1] >= y0 - cutoff_px && p[1] <= y1 + cutoff_px
        })
        .map(|(i, _)| i)
        .collect()
}

/// Largest absolute channel difference over pixels where either frame has
/// foreground content (nonzero rgb can only come from covered samples).
pub fn max_rgb_diff(a: &BlurFrame, b: &BlurFrame) -> f64 {
    a.rgb
        .iter()
        .zip(&b.rgb)
        .flat_map(|(x, y)| (0..3).map(move |c| (x[c] - y[c]).abs()))
        .fold(0.0, f64::max)
}

pub fn max_alpha_diff(a: &BlurFrame, b: &BlurFrame) -> f64 {
    a.alpha
        .iter()
        .zip(&b.alpha)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<BlurFrame>();
    check::<Scene>();
}
