//! The composition objective: aesthetic score minus weighted uncovered fraction.

mod external;
mod thirds;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{HttpScorer, DEFAULT_TIMEOUT};
pub use thirds::{thirds_analysis, ThirdsAnalysis, ThirdsScorer, THIRDS_POINTS};

use crate::camera::{to_render_spec, BaseCamera, CameraParams, RenderSpec, SearchBounds, PARAM_COUNT};
use crate::image::{Image, ImageError};
use crate::ingest::PointCloud;
use crate::optimize::Objective;
use crate::render::{auto_splat_radius, render, Mask, RenderOutput};

pub const DEFAULT_LAMBDA_MASK: f64 = 10.0;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer request to {endpoint} timed out after {seconds:.1} s")]
    Timeout { endpoint: String, seconds: f64 },
    #[error("scorer at {endpoint} answered HTTP {status}")]
    Status { endpoint: String, status: u16 },
    #[error("scorer protocol violation: {0}")]
    Protocol(String),
    #[error("scorer at {endpoint} unreachable: {reason}")]
    Transport { endpoint: String, reason: String },
    #[error("failed to encode image for scoring: {0}")]
    Encode(#[from] ImageError),
    #[error("scorer {name} produced non-finite score {value}")]
    NonFinite { name: String, value: f64 },
}

/// Aesthetic evaluation of a rendered view; larger is better.
pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;

    fn score(&self, image: &Image) -> Result<f64, ScorerError>;

    /// Whether equal images always receive equal scores.
    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Returns the same value for every image.
#[derive(Clone, Debug)]
pub struct ConstantScorer {
    value: f64,
    name: String,
}

impl ConstantScorer {
    pub fn new(value: f64) -> Self {
        Self {
            value,
            name: format!("constant:{value}"),
        }
    }
}

impl Scorer for ConstantScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, _image: &Image) -> Result<f64, ScorerError> {
        Ok(self.value)
    }
}

/// Mean Rec. 709 luminance in `[0, 1]`.
#[derive(Clone, Debug, Default)]
pub struct MeanLuminanceScorer;

impl Scorer for MeanLuminanceScorer {
    fn name(&self) -> &str {
        "mean_luminance"
    }

    fn score(&self, image: &Image) -> Result<f64, ScorerError> {
        let sum: f64 = image.pixels().iter().map(|&p| crate::image::luminance(p)).sum();
        Ok(sum / image.pixels().len() as f64)
    }
}

/// Squared distance between the rendered mask and the all-covered mask, per pixel.
pub fn mask_loss(mask: &Mask) -> f64 {
    let sum: f64 = mask
        .values()
        .iter()
        .map(|&m| {
            let d = 1.0 - f64::from(u8::from(m));
            d * d
        })
        .sum();
    sum / (mask.width() * mask.height()) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub score: f64,
    pub mask_loss: f64,
    pub lambda_mask: f64,
    pub total: f64,
}

impl ObjectiveValue {
    pub fn new(score: f64, mask_loss: f64, lambda_mask: f64) -> Self {
        Self {
            score,
            mask_loss,
            lambda_mask,
            total: score - lambda_mask * mask_loss,
        }
    }

    /// A plain objective value without a mask term.
    pub fn plain(total: f64) -> Self {
        Self::new(total, 0.0, 0.0)
    }
}

#[derive(Debug, Error)]
#[error("evaluation failed in scorer {scorer}: {source}")]
pub struct EvalError {
    pub scorer: String,
    #[source]
    pub source: ScorerError,
}

/// How large each point splat is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SplatPolicy {
    /// See [`auto_splat_radius`].
    #[default]
    Auto,
    Fixed(u32),
}

impl SplatPolicy {
    pub fn radius(&self, spec: &RenderSpec, base: &BaseCamera) -> u32 {
        match *self {
            Self::Auto => auto_splat_radius(spec, base),
            Self::Fixed(r) => r,
        }
    }
}

pub fn render_view(cloud: &PointCloud, params: &CameraParams, base: &BaseCamera, splat: SplatPolicy) -> RenderOutput {
    let spec = to_render_spec(params, base);
    render(cloud, &spec, splat.radius(&spec, base))
}

/// Renders once and scores color and mask of the same render.
pub fn evaluate_render(out: &RenderOutput, scorer: &dyn Scorer, lambda_mask: f64) -> Result<ObjectiveValue, EvalError> {
    let score = scorer.score(&out.color).map_err(|source| EvalError {
        scorer: scorer.name().to_string(),
        source,
    })?;
    if !score.is_finite() {
        return Err(EvalError {
            scorer: scorer.name().to_string(),
            source: ScorerError::NonFinite {
                name: scorer.name().to_string(),
                value: score,
            },
        });
    }
    Ok(ObjectiveValue::new(score, mask_loss(&out.mask), lambda_mask))
}

pub fn evaluate(
    cloud: &PointCloud,
    params: &CameraParams,
    base: &BaseCamera,
    scorer: &dyn Scorer,
    lambda_mask: f64,
    splat: SplatPolicy,
) -> Result<ObjectiveValue, EvalError> {
    evaluate_render(&render_view(cloud, params, base, splat), scorer, lambda_mask)
}

/// Which parameters the optimizer searches over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchSpace {
    /// All nine parameters.
    Full,
    /// Scale coefficients pinned at 1; seven parameters searched.
    FrozenScaling,
}

impl SearchSpace {
    pub fn dim(&self) -> usize {
        match self {
            Self::Full => PARAM_COUNT,
            Self::FrozenScaling => PARAM_COUNT - 2,
        }
    }
}

/// The view objective over the optimizer's unit box.
pub struct ViewObjective {
    pub cloud: Arc<PointCloud>,
    pub base: BaseCamera,
    pub bounds: SearchBounds,
    pub scorer: Arc<dyn Scorer>,
    pub lambda_mask: f64,
    pub splat: SplatPolicy,
    pub space: SearchSpace,
}

impl ViewObjective {
    /// Expands a search vector to the full normalized parameter vector.
    pub fn full_vector(&self, x: &[f64]) -> [f64; PARAM_COUNT] {
        match self.space {
            SearchSpace::Full => x.try_into().expect("search vector has nine components"),
            SearchSpace::FrozenScaling => {
                let identity = self.bounds.encode(&CameraParams::identity());
                let mut full = identity;
                full[..PARAM_COUNT - 2].copy_from_slice(x);
                full
            }
        }
    }

    pub fn params(&self, x: &[f64]) -> CameraParams {
        self.bounds.decode(&self.full_vector(x))
    }

    /// Search-space encoding of `params`.
    pub fn encode(&self, params: &CameraParams) -> Vec<f64> {
        let full = self.bounds.encode(params);
        full[..self.space.dim()].to_vec()
    }
}

impl Objective for ViewObjective {
    type Error = EvalError;

    fn dim(&self) -> usize {
        self.space.dim()
    }

    fn evaluate(&self, x: &[f64]) -> Result<ObjectiveValue, EvalError> {
        evaluate(
            &self.cloud,
            &self.params(x),
            &self.base,
            self.scorer.as_ref(),
            self.lambda_mask,
            self.splat,
        )
    }
}
