//! Scene ingestion: images, depth maps, PLY clouds, preprocessing and RGB-D unprojection.

mod cloud;
mod depth;
pub mod ply;
mod preprocess;
mod unproject;

pub use cloud::{CloudError, PointCloud};
pub use depth::{DepthError, DepthMap};
pub use ply::{encode_ply, load_ply, parse_ply, save_ply, PlyEncoding, PlyError};
pub use preprocess::{
    preprocess_depth, preprocess_resize_pad, resize_bilinear, scaled_dims, PreprocessError, PAD,
    TARGET_LONG_SIDE,
};
pub use unproject::{median, unproject_rgbd, UnprojectError, DEFAULT_BASE_FOVY};
