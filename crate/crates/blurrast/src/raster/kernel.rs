//! Inner rasterization kernels.
//!
//! The fast path is organized segment-major / pixel-major / face-major with
//! the time samples innermost, so the per-(pixel, face) rational coefficients
//! are computed once and each additional sample costs one quadratic
//! evaluation. The naive path re-solves the barycentric system per frame and
//! is the benchmark baseline.
//!
//! Everything here is pixel-pure: each pixel's result depends only on its
//! own deterministic iteration over faces in ascending index order, so
//! renders are identical across thread counts.

use rayon::prelude::*;

use crate::bary::{endpoint_select, FaceMotionPoly, Triangle2, TrianglePair, DEGENERACY_EPS};
use crate::geometry::{Mesh, ScreenVertex, SegmentedMotion};
use crate::math::{pairwise_mean, Vec3};

pub(crate) const BAND_ROWS: usize = 8;

/// Per-(face, segment) precomputation shared by every pixel and sample.
#[derive(Debug, Clone)]
pub(crate) struct FacePrep {
    pub face: u32,
    pub v: [usize; 3],
    pub pair: TrianglePair,
    pub poly: FaceMotionPoly,
    pub z0: [f64; 3],
    pub z1: [f64; 3],
    pub bb0_min: [f64; 2],
    pub bb0_max: [f64; 2],
    pub bb1_min: [f64; 2],
    pub bb1_max: [f64; 2],
}

impl FacePrep {
    pub(crate) fn new(face: usize, v: [usize; 3], start: &[ScreenVertex], end: &[ScreenVertex]) -> Self {
        let tri = |kf: &[ScreenVertex]| Triangle2 {
            x: [kf[v[0]].x, kf[v[1]].x, kf[v[2]].x],
            y: [kf[v[0]].y, kf[v[1]].y, kf[v[2]].y],
        };
        let pair = TrianglePair { start: tri(start), end: tri(end) };
        Self::from_pair_z(
            face,
            v,
            pair,
            [start[v[0]].z, start[v[1]].z, start[v[2]].z],
            [end[v[0]].z, end[v[1]].z, end[v[2]].z],
        )
    }

    pub(crate) fn from_pair_z(
        face: usize,
        v: [usize; 3],
        pair: TrianglePair,
        z0: [f64; 3],
        z1: [f64; 3],
    ) -> Self {
        let bb = |t: &Triangle2| {
            (
                [t.x[0].min(t.x[1]).min(t.x[2]), t.y[0].min(t.y[1]).min(t.y[2])],
                [t.x[0].max(t.x[1]).max(t.x[2]), t.y[0].max(t.y[1]).max(t.y[2])],
            )
        };
        let (bb0_min, bb0_max) = bb(&pair.start);
        let (bb1_min, bb1_max) = bb(&pair.end);
        FacePrep {
            face: face as u32,
            v,
            poly: FaceMotionPoly::new(&pair),
            pair,
            z0,
            z1,
            bb0_min,
            bb0_max,
            bb1_min,
            bb1_max,
        }
    }

    pub fn swept_min(&self) -> [f64; 2] {
        [self.bb0_min[0].min(self.bb1_min[0]), self.bb0_min[1].min(self.bb1_min[1])]
    }

    pub fn swept_max(&self) -> [f64; 2] {
        [self.bb0_max[0].max(self.bb1_max[0]), self.bb0_max[1].max(self.bb1_max[1])]
    }

    /// Conservative time window during which the face's moving bounding box
    /// (dilated by `cut`) can contain pixel (u, v). The interpolated keyframe
    /// bounds enclose the true instantaneous bounds, so the window is a
    /// superset of the times with any coverage or near-field contribution.
    #[inline]
    fn window(&self, u: f64, v: f64, cut: f64) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        // lerp(c0, c1, t) <= bound
        let le = |lo: &mut f64, hi: &mut f64, c0: f64, c1: f64, bound: f64| {
            let slope = c1 - c0;
            if slope == 0.0 {
                if c0 > bound {
                    *lo = 1.0;
                    *hi = -1.0;
                }
            } else {
                let r = (bound - c0) / slope;
                if slope > 0.0 {
                    *hi = hi.min(r);
                } else {
                    *lo = lo.max(r);
                }
            }
        };
        le(&mut lo, &mut hi, self.bb0_min[0], self.bb1_min[0], u + cut);
        le(&mut lo, &mut hi, -self.bb0_max[0], -self.bb1_max[0], -(u - cut));
        le(&mut lo, &mut hi, self.bb0_min[1], self.bb1_min[1], v + cut);
        le(&mut lo, &mut hi, -self.bb0_max[1], -self.bb1_max[1], -(v - cut));
        if lo <= hi {
            Some((lo, hi))
        } else {
            None
        }
    }
}

/// Build the per-face precomputation for one segment, in face order.
pub(crate) fn prep_segment(sm: &SegmentedMotion, seg: usize, mesh: &Mesh) -> Vec<FacePrep> {
    let (start, end) = sm.segment(seg);
    mesh.faces
        .iter()
        .enumerate()
        .map(|(i, f)| FacePrep::new(i, *f, start, end))
        .collect()
}

/// Faces binned into horizontal pixel bands, ascending face order per band.
pub(crate) struct Bands {
    pub rows_per_band: usize,
    pub bins: Vec<Vec<u32>>,
}

pub(crate) fn build_bands(
    preps: &[FacePrep],
    height: usize,
    cutoff_px: f64,
    swept: bool,
) -> Bands {
    let n_bands = height.div_ceil(BAND_ROWS);
    let mut bins = vec![Vec::new(); n_bands];
    for (i, p) in preps.iter().enumerate() {
        let (y_min, y_max) = if swept {
            (p.swept_min()[1], p.swept_max()[1])
        } else {
            (p.bb0_min[1], p.bb0_max[1])
        };
        if !cutoff_px.is_finite() {
            for bin in &mut bins {
                bin.push(i as u32);
            }
            continue;
        }
        let lo_row = ((y_min - cutoff_px - 0.5).floor().max(0.0) as usize).min(height);
        let hi_row = ((y_max + cutoff_px + 0.5).ceil().max(0.0) as usize).min(height);
        if lo_row >= hi_row {
            continue;
        }
        for band in lo_row / BAND_ROWS..=(hi_row - 1) / BAND_ROWS {
            bins[band].push(i as u32);
        }
    }
    Bands { rows_per_band: BAND_ROWS, bins }
}

/// Half-open index range of the (ascending) sample times inside [lo, hi],
/// with a little slack so boundary samples never drop out to rounding.
#[inline]
pub(crate) fn sample_range(ts: &[f64], lo: f64, hi: f64) -> (usize, usize) {
    let a = ts.partition_point(|&t| t < lo - 1e-12);
    let b = ts.partition_point(|&t| t <= hi + 1e-12);
    (a, b)
}

/// Closest point of a 2D triangle to an exterior point, via the three edge
/// projections; returns the point's barycentric weights.
#[inline]
pub(crate) fn closest_point_weights(tri: &Triangle2, u: f64, v: f64) -> Vec3 {
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
    best
}

#[inline]
pub(crate) fn inside01(w: &Vec3) -> bool {
    w[0] >= 0.0 && w[0] <= 1.0 && w[1] >= 0.0 && w[1] <= 1.0 && w[2] >= 0.0 && w[2] <= 1.0
}

/// Geometry of one background contribution, shared between the forward
/// coverage kernel and the backward distance chain.
#[inline]
pub(crate) fn approx_background_geom(
    prep: &FacePrep,
    u: f64,
    v: f64,
    w: &Vec3,
    t: f64,
) -> (f64, [f64; 2], Vec3) {
    let tri_x = if endpoint_select(t) == 0 { &prep.pair.start } else { &prep.pair.end };
    let px = tri_x.point(*w);
    let wstar = closest_point_weights(tri_x, px[0], px[1]);
    let q0 = prep.pair.start.point(wstar);
    let q1 = prep.pair.end.point(wstar);
    let q = [(1.0 - t) * q0[0] + t * q1[0], (1.0 - t) * q0[1] + t * q1[1]];
    let d_sq = (u - q[0]) * (u - q[0]) + (v - q[1]) * (v - q[1]);
    (d_sq, q, wstar)
}

/// Exact-kernel counterpart: closest point on the instantaneous triangle.
#[inline]
pub(crate) fn exact_background_geom(
    tri_t: &Triangle2,
    u: f64,
    v: f64,
) -> (f64, [f64; 2], Vec3) {
    let wstar = closest_point_weights(tri_t, u, v);
    let q = tri_t.point(wstar);
    let d_sq = (u - q[0]) * (u - q[0]) + (v - q[1]) * (v - q[1]);
    (d_sq, q, wstar)
}

pub(crate) struct KernelCtx<'a> {
    pub preps: &'a [FacePrep],
    pub colors: &'a [Vec3],
    pub ts: &'a [f64],
    pub width: usize,
    pub height: usize,
    /// exp(-d_sq * kappa): squared-pixel-distance kernel factor.
    pub kappa: f64,
    pub cutoff_px: f64,
}

/// One stashed candidate: face prep index, pixel coefficients, sample range.
struct Cand {
    prep: u32,
    coeffs: crate::bary::BaryCoeffs,
    k0: u32,
    k1: u32,
}

/// One background kernel contribution recorded for the backward pass.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BgContrib {
    pub prep: u32,
    pub k: u32,
    pub a: f64,
    /// Closest point in the interpolated triangle, pixel units.
    pub q: [f64; 2],
    pub wstar: Vec3,
}

pub(crate) struct PixelSamples {
    /// Winner prep index per sample (u32::MAX = uncovered).
    pub winner: Vec<u32>,
    pub winner_w: Vec<Vec3>,
    pub alpha: Vec<f64>,
    /// prod(1 - A) per sample, valid for uncovered samples.
    pub bg_prod: Vec<f64>,
    depth: Vec<f64>,
    cands: Vec<Cand>,
}

impl PixelSamples {
    pub fn new(k: usize) -> Self {
        PixelSamples {
            winner: vec![u32::MAX; k],
            winner_w: vec![[0.0; 3]; k],
            alpha: vec![0.0; k],
            bg_prod: vec![1.0; k],
            depth: vec![f64::INFINITY; k],
            cands: Vec::new(),
        }
    }

    pub fn rgb_at(&self, ctx: &KernelCtx, k: usize) -> Vec3 {
        if self.winner[k] == u32::MAX {
            return [0.0; 3];
        }
        let prep = &ctx.preps[self.winner[k] as usize];
        let w = self.winner_w[k];
        let mut rgb = [0.0; 3];
        for i in 0..3 {
            let c = ctx.colors[prep.v[i]];
            rgb[0] += w[i] * c[0];
            rgb[1] += w[i] * c[1];
            rgb[2] += w[i] * c[2];
        }
        rgb
    }
}

/// Fast-path evaluation of every sample of one pixel: coverage/Z-buffer pass
/// then background coverage for uncovered samples. When `bg` is given, every
/// in-cutoff background contribution is recorded for the backward pass.
pub(crate) fn eval_pixel_fast_rec(
    ctx: &KernelCtx,
    bin: &[u32],
    u: f64,
    v: f64,
    out: &mut PixelSamples,
    mut bg: Option<&mut Vec<BgContrib>>,
) {
    let k_total = ctx.ts.len();
    out.winner[..k_total].fill(u32::MAX);
    out.depth[..k_total].fill(f64::INFINITY);
    out.cands.clear();

    // pass 1: coverage + Z-buffer, stashing per-face coefficients
    for &pi in bin {
        let prep = &ctx.preps[pi as usize];
        let Some((lo, hi)) = prep.window(u, v, ctx.cutoff_px.min(1e30)) else {
            continue;
        };
        let (k0, k1) = sample_range(ctx.ts, lo, hi);
        if k0 >= k1 {
            continue;
        }
        let coeffs = prep.poly.coeffs_for_pixel(u, v);
        for k in k0..k1 {
            let t = ctx.ts[k];
            let den = coeffs.den_at(t);
            if den.abs() <= DEGENERACY_EPS {
                continue;
            }
            let w = [
                ((coeffs.num_t2[0] * t + coeffs.num_t1[0]) * t + coeffs.num_t0[0]) / den,
                ((coeffs.num_t2[1] * t + coeffs.num_t1[1]) * t + coeffs.num_t0[1]) / den,
                ((coeffs.num_t2[2] * t + coeffs.num_t1[2]) * t + coeffs.num_t0[2]) / den,
            ];
            if inside01(&w) {
                let z = w[0] * ((1.0 - t) * prep.z0[0] + t * prep.z1[0])
                    + w[1] * ((1.0 - t) * prep.z0[1] + t * prep.z1[1])
                    + w[2] * ((1.0 - t) * prep.z0[2] + t * prep.z1[2]);
                if z < out.depth[k] {
                    out.depth[k] = z;
                    out.winner[k] = pi;
                    out.winner_w[k] = w;
                }
            }
        }
        out.cands.push(Cand { prep: pi, coeffs, k0: k0 as u32, k1: k1 as u32 });
    }

    // pass 2: background aggregation 1 - prod(1 - A) for uncovered samples
    let cut_sq = ctx.cutoff_px * ctx.cutoff_px;
    for k in 0..k_total {
        out.alpha[k] = if out.winner[k] == u32::MAX { 0.0 } else { 1.0 };
    }
    out.bg_prod[..k_total].fill(1.0);
    let mut any_bg = false;
    for cand in &out.cands {
        let prep = &ctx.preps[cand.prep as usize];
        for k in cand.k0 as usize..cand.k1 as usize {
            if out.winner[k] != u32::MAX {
                continue;
            }
            let t = ctx.ts[k];
            let den = cand.coeffs.den_at(t);
            if den.abs() <= DEGENERACY_EPS {
                continue;
            }
            let w = [
                ((cand.coeffs.num_t2[0] * t + cand.coeffs.num_t1[0]) * t + cand.coeffs.num_t0[0]) / den,
                ((cand.coeffs.num_t2[1] * t + cand.coeffs.num_t1[1]) * t + cand.coeffs.num_t0[1]) / den,
                ((cand.coeffs.num_t2[2] * t + cand.coeffs.num_t1[2]) * t + cand.coeffs.num_t0[2]) / den,
            ];
            let (d_sq, q, wstar) = approx_background_geom(prep, u, v, &w, t);
            if d_sq <= cut_sq {
                let a = (-d_sq * ctx.kappa).exp();
                out.bg_prod[k] *= 1.0 - a;
                any_bg = true;
                if let Some(rec) = bg.as_deref_mut() {
                    rec.push(BgContrib { prep: cand.prep, k: k as u32, a, q, wstar });
                }
            }
        }
    }
    if any_bg {
        for k in 0..k_total {
            if out.winner[k] == u32::MAX {
                out.alpha[k] = 1.0 - out.bg_prod[k];
            }
        }
    }
}

#[inline]
pub(crate) fn eval_pixel_fast(ctx: &KernelCtx, bin: &[u32], u: f64, v: f64, out: &mut PixelSamples) {
    eval_pixel_fast_rec(ctx, bin, u, v, out, None);
}

/// Render a whole segment with the fast solver, reducing the K samples of
/// every pixel to their mean (pairwise tree per pixel).
pub(crate) fn render_segment_fast_mean(
    ctx: &KernelCtx,
    bands: &Bands,
    rgb_out: &mut [Vec3],
    alpha_out: &mut [f64],
) {
    let w = ctx.width;
    let band_px = bands.rows_per_band * w;
    rgb_out
        .par_chunks_mut(band_px)
        .zip(alpha_out.par_chunks_mut(band_px))
        .enumerate()
        .for_each(|(band, (rgb_band, alpha_band))| {
            let bin = &bands.bins[band];
            let r0 = band * bands.rows_per_band;
            let mut px = PixelSamples::new(ctx.ts.len());
            let mut rgbs = vec![[0.0f64; 3]; ctx.ts.len()];
            for (local, (rgb, alpha)) in rgb_band.iter_mut().zip(alpha_band.iter_mut()).enumerate() {
                let (r, c) = (r0 + local / w, local % w);
                let (u, v) = (c as f64 + 0.5, r as f64 + 0.5);
                eval_pixel_fast(ctx, bin, u, v, &mut px);
                let k = ctx.ts.len();
                for i in 0..k {
                    rgbs[i] = px.rgb_at(ctx, i);
                }
                *rgb = [
                    pairwise_mean(k, |i| rgbs[i][0]),
                    pairwise_mean(k, |i| rgbs[i][1]),
                    pairwise_mean(k, |i| rgbs[i][2]),
                ];
                *alpha = pairwise_mean(k, |i| px.alpha[i]);
            }
        });
}

/// Per-face instantaneous state for the naive per-frame path.
pub(crate) struct NaiveFace {
    pub tri: Triangle2,
    pub z: [f64; 3],
    pub v: [usize; 3],
    pub bb_min: [f64; 2],
    pub bb_max: [f64; 2],
}

pub(crate) fn prep_naive_frame(preps: &[FacePrep], t: f64) -> Vec<NaiveFace> {
    preps
        .iter()
        .map(|p| {
            let tri = p.pair.at(t);
            let bb_min = [tri.x[0].min(tri.x[1]).min(tri.x[2]), tri.y[0].min(tri.y[1]).min(tri.y[2])];
            let bb_max = [tri.x[0].max(tri.x[1]).max(tri.x[2]), tri.y[0].max(tri.y[1]).max(tri.y[2])];
            let s = 1.0 - t;
            NaiveFace {
                tri,
                z: [
                    s * p.z0[0] + t * p.z1[0],
                    s * p.z0[1] + t * p.z1[1],
                    s * p.z0[2] + t * p.z1[2],
                ],
                v: p.v,
                bb_min,
                bb_max,
            }
        })
        .collect()
}

pub(crate) fn build_bands_naive(faces: &[NaiveFace], height: usize, cutoff_px: f64) -> Bands {
    let n_bands = height.div_ceil(BAND_ROWS);
    let mut bins = vec![Vec::new(); n_bands];
    for (i, p) in faces.iter().enumerate() {
        if !cutoff_px.is_finite() {
            for bin in &mut bins {
                bin.push(i as u32);
            }
            continue;
        }
        let lo_row = ((p.bb_min[1] - cutoff_px - 0.5).floor().max(0.0) as usize).min(height);
        let hi_row = ((p.bb_max[1] + cutoff_px + 0.5).ceil().max(0.0) as usize).min(height);
        if lo_row >= hi_row {
            continue;
        }
        for band in lo_row / BAND_ROWS..=(hi_row - 1) / BAND_ROWS {
            bins[band].push(i as u32);
        }
    }
    Bands { rows_per_band: BAND_ROWS, bins }
}

/// One naive frame: per-frame barycentric solve, Z-buffer, exact background
/// kernel; winner face indices (into the mesh) optionally recorded.
pub(crate) fn render_frame_naive(
    faces: &[NaiveFace],
    bands: &Bands,
    colors: &[Vec3],
    width: usize,
    height: usize,
    kappa: f64,
    cutoff_px: f64,
    rgb_out: &mut [Vec3],
    alpha_out: &mut [f64],
    mut zface_out: Option<&mut [u32]>,
) {
    let band_px = bands.rows_per_band * width;
    let _ = height;
    let cut_sq = cutoff_px * cutoff_px;
    let zface_bands: Vec<Option<&mut [u32]>> = match zface_out.as_mut() {
        Some(z) => z.chunks_mut(band_px).map(Some).collect(),
        None => (0..bands.bins.len()).map(|_| None).collect(),
    };
    rgb_out
        .par_chunks_mut(band_px)
        .zip(alpha_out.par_chunks_mut(band_px))
        .zip(zface_bands.into_par_iter())
        .enumerate()
        .for_each(|(band, ((rgb_band, alpha_band), mut zface_band))| {
            let bin = &bands.bins[band];
            let r0 = band * bands.rows_per_band;
            for local in 0..rgb_band.len() {
                let (r, c) = (r0 + local / width, local % width);
                let (u, v) = (c as f64 + 0.5, r as f64 + 0.5);
                let mut best_depth = f64::INFINITY;
                let mut best: Option<(u32, Vec3)> = None;
                for &fi in bin {
                    let f = &faces[fi as usize];
                    if u < f.bb_min[0] - cutoff_px
                        || u > f.bb_max[0] + cutoff_px
                        || v < f.bb_min[1] - cutoff_px
                        || v > f.bb_max[1] + cutoff_px
                    {
                        continue;
                    }
                    let det = f.tri.det();
                    if det.abs() <= DEGENERACY_EPS {
                        continue;
                    }
                    let (x, y) = (&f.tri.x, &f.tri.y);
                    let w = [
                        ((y[1] - y[2]) * u + (x[2] - x[1]) * v + (x[1] * y[2] - x[2] * y[1])) / det,
                        ((y[2] - y[0]) * u + (x[0] - x[2]) * v + (x[2] * y[0] - x[0] * y[2])) / det,
                        ((y[0] - y[1]) * u + (x[1] - x[0]) * v + (x[0] * y[1] - x[1] * y[0])) / det,
                    ];
                    if inside01(&w) {
                        let z = w[0] * f.z[0] + w[1] * f.z[1] + w[2] * f.z[2];
                        if z < best_depth {
                            best_depth = z;
                            best = Some((fi, w));
                        }
                    }
                }
                if let Some((fi, w)) = best {
                    let f = &faces[fi as usize];
                    let mut rgb = [0.0; 3];
                    for i in 0..3 {
                        let cc = colors[f.v[i]];
                        rgb[0] += w[i] * cc[0];
                        rgb[1] += w[i] * cc[1];
                        rgb[2] += w[i] * cc[2];
                    }
                    rgb_band[local] = rgb;
                    alpha_band[local] = 1.0;
                    if let Some(z) = zface_band.as_mut() {
                        z[local] = fi;
                    }
                } else {
                    let mut prod = 1.0f64;
                    for &fi in bin {
                        let f = &faces[fi as usize];
                        if u < f.bb_min[0] - cutoff_px
                            || u > f.bb_max[0] + cutoff_px
                            || v < f.bb_min[1] - cutoff_px
                            || v > f.bb_max[1] + cutoff_px
                        {
                            continue;
                        }
                        let (d_sq, _, _) = exact_background_geom(&f.tri, u, v);
                        if d_sq <= cut_sq {
                            prod *= 1.0 - (-d_sq * kappa).exp();
                        }
                    }
                    rgb_band[local] = [0.0; 3];
                    alpha_band[local] = 1.0 - prod;
                    if let Some(z) = zface_band.as_mut() {
                        z[local] = u32::MAX;
                    }
                }
            }
        });
}
