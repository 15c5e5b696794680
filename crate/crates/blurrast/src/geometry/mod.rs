//! Meshes, cameras, motion trajectories, and the projection/segmentation
//! machinery that turns an analytic motion into linear keyframe pairs.

mod camera;
mod mesh;
mod segment;
mod trajectory;

pub use camera::{Camera, ScreenVertex, NEAR_EPS};
pub use mesh::{
    cow_proxy, cube, icosahedron, icosphere, load_obj, save_obj, uv_sphere, Mesh, DEFAULT_GRAY,
};
pub use segment::{sample_times, segment, SegmentedMotion};
pub use trajectory::MotionTrajectory;
