use std::fs;
use std::path::Path;

use image::DynamicImage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("depth map must be at least 1x1, got {width}x{height}")]
    Empty { width: usize, height: usize },
    #[error("depth buffer holds {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("depth at pixel ({x}, {y}) is {value}; depths must be positive and finite")]
    InvalidDepth { x: usize, y: usize, value: f32 },
    #[error("depth png {path} must be single-channel 8- or 16-bit grayscale")]
    PngFormat { path: String },
    #[error("raw depth file {path} is truncated: {reason}")]
    Truncated { path: String, reason: String },
    #[error("failed to decode depth png {path}: {source}")]
    Decode {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-pixel depth, larger values farther from the camera.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self, DepthError> {
        if width == 0 || height == 0 {
            return Err(DepthError::Empty { width, height });
        }
        if values.len() != width * height {
            return Err(DepthError::BufferSize {
                expected: width * height,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(DepthError::InvalidDepth {
                x: i % width,
                y: i / width,
                value: values[i],
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Result<Self, DepthError> {
        let values = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    /// Loads `.png` as integer grayscale times `png_scale`; anything else as raw float32.
    pub fn load(path: &Path, png_scale: f64) -> Result<Self, DepthError> {
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png {
            Self::load_png(path, png_scale)
        } else {
            Self::load_raw(path)
        }
    }

    pub fn load_png(path: &Path, scale: f64) -> Result<Self, DepthError> {
        let decoded = image::open(path).map_err(|source| DepthError::Decode {
            path: path.display().to_string(),
            source,
        })?;
        let (w, h) = (decoded.width() as usize, decoded.height() as usize);
        let values: Vec<f32> = match decoded {
            DynamicImage::ImageLuma16(buf) => buf
                .into_raw()
                .into_iter()
                .map(|v| (f64::from(v) * scale) as f32)
                .collect(),
            DynamicImage::ImageLuma8(buf) => buf
                .into_raw()
                .into_iter()
                .map(|v| (f64::from(v) * scale) as f32)
                .collect(),
            _ => {
                return Err(DepthError::PngFormat {
                    path: path.display().to_string(),
                })
            }
        };
        Self::new(w, h, values)
    }

    /// Raw layout: `u32 width`, `u32 height`, then `width * height` float32, all little-endian, row-major.
    pub fn load_raw(path: &Path) -> Result<Self, DepthError> {
        let bytes = fs::read(path)?;
        Self::decode_raw(&bytes).map_err(|reason| DepthError::Truncated {
            path: path.display().to_string(),
            reason,
        })?
    }

    fn decode_raw(bytes: &[u8]) -> Result<Result<Self, DepthError>, String> {
        if bytes.len() < 8 {
            return Err(format!("{} bytes, header needs 8", bytes.len()));
        }
        let width = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let need = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| format!("dimensions {width}x{height} overflow"))?;
        let payload = &bytes[8..];
        if payload.len() < need {
            return Err(format!("payload has {} bytes, expected {need}", payload.len()));
        }
        let values = payload[..need]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self::new(width, height, values))
    }

    pub fn encode_raw(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.values.len());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn save_raw(&self, path: &Path) -> Result<(), DepthError> {
        fs::write(path, self.encode_raw())?;
        Ok(())
    }
}
