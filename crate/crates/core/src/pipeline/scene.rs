//! Turning configured inputs into a point cloud plus its capture camera.

use std::path::Path;
use std::sync::Arc;

use crate::camera::BaseCamera;
use crate::image::Image;
use crate::ingest::{load_ply, preprocess_depth, preprocess_resize_pad, unproject_rgbd, DepthMap, PointCloud, UnprojectError};

use super::config::{ConfigError, PipelineConfig};
use super::PipelineError;

/// A reconstructed scene ready for optimization.
#[derive(Clone, Debug)]
pub struct Scene {
    pub cloud: Arc<PointCloud>,
    /// Camera at full output resolution.
    pub base: BaseCamera,
}

impl Scene {
    /// The camera used inside the optimization loop.
    pub fn search_base(&self, downscale: usize) -> BaseCamera {
        let d = downscale.max(1);
        BaseCamera {
            fovy_deg: self.base.fovy_deg,
            width: (self.base.width / d).max(1),
            height: (self.base.height / d).max(1),
        }
    }
}

/// Builds a scene from an RGB image and a depth map of the same size.
pub fn scene_from_rgbd(image: &Image, depth: &DepthMap, base_fovy: f64, preprocess: bool) -> Result<Scene, PipelineError> {
    if (image.width(), image.height()) != (depth.width(), depth.height()) {
        return Err(UnprojectError::DimensionMismatch {
            image_w: image.width(),
            image_h: image.height(),
            depth_w: depth.width(),
            depth_h: depth.height(),
        }
        .into());
    }
    let (image, depth) = if preprocess {
        (preprocess_resize_pad(image)?, preprocess_depth(depth)?)
    } else {
        (image.clone(), depth.clone())
    };
    let cloud = unproject_rgbd(&image, &depth, base_fovy)?;
    Ok(Scene {
        cloud: Arc::new(cloud),
        base: BaseCamera {
            fovy_deg: base_fovy,
            width: image.width(),
            height: image.height(),
        },
    })
}

pub fn load_rgbd(image: &Path, depth: &Path, depth_scale: f64) -> Result<(Image, DepthMap), PipelineError> {
    let img = Image::load_png(image).map_err(|e| PipelineError::input(image, e))?;
    let dep = DepthMap::load(depth, depth_scale).map_err(|e| PipelineError::input(depth, e))?;
    Ok((img, dep))
}

/// Loads whichever scene source the config names.
pub fn load_scene(config: &PipelineConfig) -> Result<Scene, PipelineError> {
    config.validate_scene()?;
    if let Some(ply) = &config.ply {
        let cloud = load_ply(ply).map_err(|e| PipelineError::input(ply, e))?;
        let base = config.configured_base().ok_or(ConfigError::PlyNeedsDims)?;
        return Ok(Scene {
            cloud: Arc::new(cloud),
            base,
        });
    }
    let (image_path, depth_path) = (config.image.as_ref().expect("validated"), config.depth.as_ref().expect("validated"));
    let (image, depth) = load_rgbd(image_path, depth_path, config.depth_scale)?;
    scene_from_rgbd(&image, &depth, config.base_fovy, config.preprocess)
}
