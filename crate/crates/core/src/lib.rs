//! Photo recomposition by searching camera parameters over a colored point cloud.
//!
//! The pipeline reconstructs a point cloud from an RGB-D photograph, renders it
//! from candidate cameras, and maximizes an aesthetic score penalized by the
//! fraction of the frame that no point covers.

pub mod camera;
pub mod image;
pub mod ingest;
pub mod objective;
pub mod optimize;
pub mod pipeline;
pub mod render;
pub mod synthetic;

pub use crate::camera::{BaseCamera, CameraParams, RenderSpec, SearchBounds};
pub use crate::image::Image;
pub use crate::ingest::{DepthMap, PointCloud};
pub use crate::objective::{ObjectiveValue, Scorer};
pub use crate::render::{render, Mask, RenderOutput};
pub use crate::pipeline::{PipelineConfig, PipelineError};
