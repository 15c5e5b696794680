//! Differentiable motion-blur soft rasterizer for triangle meshes.
//!
//! The renderer synthesizes motion blur by averaging many time samples of a
//! soft rasterization. Per-pixel barycentric weights under linear vertex
//! motion are a rational quadratic in time whose coefficients are
//! precomputed once per pixel/face/segment ([`bary`]), which is what makes
//! dense temporal supersampling affordable. A hand-derived reverse pass
//! ([`grad`]) carries image gradients back to world-space vertex positions
//! and per-vertex colors, and [`optim`] uses it to recover shape and color
//! from multi-view blurred images.

pub mod bary;
pub mod bench;
pub mod config;
pub mod error;
pub mod geometry;
pub mod grad;
pub mod math;
pub mod optim;
pub mod raster;
pub mod viridis;

pub use error::{Error, Result};
