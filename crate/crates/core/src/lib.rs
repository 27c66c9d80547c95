//! Mesh saliency for free six-degree-of-freedom viewing.
//!
//! The crate covers the whole path from raw head-pose and eye-tracking
//! recordings to evaluated saliency maps:
//!
//! - [`mesh`]: indexed triangle meshes, OBJ/PLY-ascii I/O, vertex normals,
//!   a k-d tree over vertices and a BVH over triangles.
//! - [`gaze`]: head orientation, screen and gaze points, the actual
//!   sight-line and its intersection with the mesh.
//! - [`fixation`]: distance-adaptive I-VT classification, temporal
//!   clustering and random-walk cluster centers.
//! - [`visibility`]: depth-buffer visible set for a 6DoF pose.
//! - [`attention`]: fixation density maps, PLCC and per-view ground truth.
//! - [`saliency`]: FPFH uniqueness with visual bias, plus a multi-scale
//!   curvature baseline.
//! - [`evaluation`]: CC/SE/KL, visitor-weighted aggregation and the
//!   attention-bias and viewing-direction studies.
//! - [`harness`]: configuration, file schemas, synthetic recordings and the
//!   command implementations behind the `sixdof` binary.
//!
//! Data-parallel loops run on rayon when the `parallel` feature (default) is
//! enabled and fall back to plain iterators otherwise. Results are identical
//! in both modes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod error;
pub mod evaluation;
pub mod fixation;
pub mod gaze;
pub mod harness;
pub mod mesh;
mod par;
pub mod saliency;
pub mod visibility;

pub use error::{Error, Result};

/// Scene-space vector in meters (left-handed, Y up).
pub type Vec3 = nalgebra::Vector3<f64>;

/// Version stamp written into every metadata sidecar.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
