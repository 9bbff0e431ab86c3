use thiserror::Error;

use super::cloud::PointCloud;
use super::depth::DepthMap;
use crate::camera::{BaseCamera, RenderSpec};
use crate::image::Image;

pub const DEFAULT_BASE_FOVY: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum UnprojectError {
    #[error("image is {image_w}x{image_h} but depth map is {depth_w}x{depth_h}")]
    DimensionMismatch {
        image_w: usize,
        image_h: usize,
        depth_w: usize,
        depth_h: usize,
    },
    #[error("base fovy {0} deg is outside (10, 120)")]
    FovyOutOfRange(f64),
}

/// Median of a non-empty sample; mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Lifts every pixel into the capture camera frame.
///
/// Depths are rescaled so their median is 1.0; pixel `(u, v)` lands on the
/// pinhole ray through that pixel at that depth along `-z`.
pub fn unproject_rgbd(image: &Image, depth: &DepthMap, base_fovy_deg: f64) -> Result<PointCloud, UnprojectError> {
    if (image.width(), image.height()) != (depth.width(), depth.height()) {
        return Err(UnprojectError::DimensionMismatch {
            image_w: image.width(),
            image_h: image.height(),
            depth_w: depth.width(),
            depth_h: depth.height(),
        });
    }
    if !(base_fovy_deg > 10.0 && base_fovy_deg < 120.0) {
        return Err(UnprojectError::FovyOutOfRange(base_fovy_deg));
    }
    let raw: Vec<f64> = depth.values().iter().map(|&d| f64::from(d)).collect();
    let scale = median(&raw);
    let spec = RenderSpec::identity(&BaseCamera {
        fovy_deg: base_fovy_deg,
        width: image.width(),
        height: image.height(),
    });
    let w = image.width();
    let positions = raw
        .iter()
        .enumerate()
        .map(|(i, d)| spec.unproject_camera((i % w) as f64, (i / w) as f64, d / scale))
        .collect();
    Ok(PointCloud::new(positions, image.pixels().to_vec()).expect("valid image and depth give a valid cloud"))
}
