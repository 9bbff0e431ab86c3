//! Small procedural RGB-D scenes used as fixtures and demos.

use std::path::Path;

use crate::image::{Image, ImageError};
use crate::ingest::{DepthError, DepthMap};

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub name: String,
    pub image: Image,
    pub depth: DepthMap,
}

/// A bright round subject in front of a textured backdrop.
#[derive(Clone, Copy, Debug)]
pub struct SubjectSpec {
    /// Normalized `(x, y)` center in the frame.
    pub center: (f64, f64),
    /// Radius as a fraction of the frame height.
    pub radius: f64,
    pub color: [f32; 3],
    pub depth: f32,
}

fn hash_noise(x: usize, y: usize, salt: u32) -> f32 {
    let mut h = (x as u32).wrapping_mul(0x9E37_79B1) ^ (y as u32).wrapping_mul(0x85EB_CA77) ^ salt.wrapping_mul(0xC2B2_AE3D);
    h ^= h >> 15;
    h = h.wrapping_mul(0x2C1B_3C6D);
    h ^= h >> 12;
    (h & 0xFFFF) as f32 / 65535.0
}

/// Builds a scene whose backdrop slopes from far at the top to nearer at the bottom.
pub fn subject_scene(name: &str, width: usize, height: usize, subjects: &[SubjectSpec], salt: u32) -> SyntheticScene {
    let fy = |y: usize| y as f64 / (height - 1) as f64;
    let fx = |x: usize| x as f64 / (width - 1) as f64;
    let inside = |x: usize, y: usize| -> Option<&SubjectSpec> {
        subjects.iter().find(|s| {
            let dx = (fx(x) - s.center.0) * width as f64 / height as f64;
            let dy = fy(y) - s.center.1;
            (dx * dx + dy * dy).sqrt() <= s.radius
        })
    };
    let image = Image::from_fn(width, height, |x, y| match inside(x, y) {
        Some(s) => {
            let n = 0.05 * hash_noise(x, y, salt ^ 0xA5);
            s.color.map(|c| (c - n).clamp(0.0, 1.0))
        }
        None => {
            let t = fy(y) as f32;
            let n = 0.04 * hash_noise(x, y, salt);
            [0.10 + 0.06 * t + n, 0.12 + 0.04 * t + n, 0.18 - 0.05 * t + n]
        }
    });
    let depth = DepthMap::from_fn(width, height, |x, y| match inside(x, y) {
        Some(s) => s.depth,
        None => 2.0 - 0.6 * fy(y) as f32,
    })
    .expect("synthetic depths are positive");
    SyntheticScene {
        name: name.to_string(),
        image,
        depth,
    }
}

/// The bundled fixture set: three small scenes with differently placed subjects.
pub fn fixture_scenes() -> Vec<SyntheticScene> {
    let bright = [0.95, 0.9, 0.8];
    vec![
        subject_scene(
            "centered",
            64,
            48,
            &[SubjectSpec {
                center: (0.5, 0.5),
                radius: 0.16,
                color: bright,
                depth: 1.0,
            }],
            1,
        ),
        subject_scene(
            "edge",
            64,
            48,
            &[SubjectSpec {
                center: (0.85, 0.45),
                radius: 0.14,
                color: [0.9, 0.75, 0.3],
                depth: 1.1,
            }],
            2,
        ),
        subject_scene(
            "portrait",
            40,
            56,
            &[SubjectSpec {
                center: (0.45, 0.62),
                radius: 0.12,
                color: [0.85, 0.95, 0.9],
                depth: 0.9,
            }],
            3,
        ),
    ]
}

/// Writes `<name>.png` and `<name>.depth.f32` into `dir`.
pub fn write_scene(scene: &SyntheticScene, dir: &Path) -> Result<(), WriteError> {
    scene.image.save_png(&dir.join(format!("{}.png", scene.name)))?;
    scene.depth.save_raw(&dir.join(format!("{}.depth.f32", scene.name)))?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum WriteError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Depth(#[from] DepthError),
}
