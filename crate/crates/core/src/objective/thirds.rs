//! Rule-of-thirds plus contrast scorer.
//!
//! Saliency is the absolute luminance deviation from the image mean. The score
//! rewards a saliency centroid near one of the four thirds intersections and
//! a luminance spread up to a standard deviation of 0.5; the range is `[0, 3]`.
//! Normalized coordinates are corner-aligned: `x / (width - 1)`.

use serde::Serialize;

use super::{Scorer, ScorerError};
use crate::image::{luminance, Image};

pub const THIRDS_POINTS: [[f64; 2]; 4] = [
    [1.0 / 3.0, 1.0 / 3.0],
    [1.0 / 3.0, 2.0 / 3.0],
    [2.0 / 3.0, 1.0 / 3.0],
    [2.0 / 3.0, 2.0 / 3.0],
];

const DISTANCE_SCALE: f64 = 0.4714;
const CONTRAST_SCALE: f64 = 0.5;
const THIRDS_WEIGHT: f64 = 0.7;
const CONTRAST_WEIGHT: f64 = 0.3;
const SCORE_SCALE: f64 = 3.0;

/// Intermediate quantities of the thirds score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThirdsAnalysis {
    /// `None` when the image has no saliency.
    pub centroid: Option<[f64; 2]>,
    /// Distance from the centroid to the nearest thirds point.
    pub distance: Option<f64>,
    pub thirds_term: f64,
    pub contrast_term: f64,
    pub score: f64,
}

fn normalized(coord: usize, len: usize) -> f64 {
    if len == 1 {
        0.5
    } else {
        coord as f64 / (len - 1) as f64
    }
}

pub fn thirds_analysis(image: &Image) -> ThirdsAnalysis {
    let (w, h) = (image.width(), image.height());
    let lum: Vec<f64> = image.pixels().iter().map(|&p| luminance(p)).collect();
    let n = lum.len() as f64;
    let mean = lum.iter().sum::<f64>() / n;

    let mut total = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for (i, &l) in lum.iter().enumerate() {
        let s = (l - mean).abs();
        total += s;
        cx += s * normalized(i % w, w);
        cy += s * normalized(i / w, h);
    }
    if total < 1e-9 {
        return ThirdsAnalysis {
            centroid: None,
            distance: None,
            thirds_term: 0.0,
            contrast_term: 0.0,
            score: 0.0,
        };
    }
    let centroid = [cx / total, cy / total];
    let distance = THIRDS_POINTS
        .iter()
        .map(|t| ((centroid[0] - t[0]).powi(2) + (centroid[1] - t[1]).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min);
    let thirds_term = 1.0 - (distance / DISTANCE_SCALE).min(1.0);
    let variance = lum.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    let contrast_term = (variance.sqrt() / CONTRAST_SCALE).min(1.0);
    ThirdsAnalysis {
        centroid: Some(centroid),
        distance: Some(distance),
        thirds_term,
        contrast_term,
        score: SCORE_SCALE * (THIRDS_WEIGHT * thirds_term + CONTRAST_WEIGHT * contrast_term),
    }
}

/// Built-in scorer `thirds`.
#[derive(Clone, Debug, Default)]
pub struct ThirdsScorer;

impl Scorer for ThirdsScorer {
    fn name(&self) -> &str {
        "thirds"
    }

    fn score(&self, image: &Image) -> Result<f64, ScorerError> {
        Ok(thirds_analysis(image).score)
    }
}
