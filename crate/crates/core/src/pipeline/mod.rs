//! End-to-end orchestration: load a scene, search for a better view, write artifacts.

mod batch;
mod config;
mod report;
mod run;
mod scene;

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub use batch::{discover_inputs, run_ablation, run_batch, BatchInput, BatchOutcome, InputSource};
pub use config::{ConfigError, PipelineConfig, ScorerChoice};
pub use report::{ROOT_DATASET, TOTAL_LABEL, 
    AblationRow, AblationTable, DatasetAggregate, FailureRecord, ReportRow, RunReport, TimingRecord,
};
pub use run::{
    ablate_scene, input_value, optimize_local, optimize_with_and_without_scaling, run_scene, run_single,
    AblationScene, Method, RunResult, RunSummary, ScalingComparison,
};
pub use scene::{load_rgbd, load_scene, scene_from_rgbd, Scene};

use crate::ingest::{PreprocessError, UnprojectError};
use crate::objective::EvalError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {message}")]
    Input { path: String, message: String },
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Unproject(#[from] UnprojectError),
    #[error("objective evaluation {evaluation} failed: {source}")]
    Objective {
        evaluation: usize,
        #[source]
        source: EvalError,
    },
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
    #[error("no inputs found under {0}")]
    NoInputs(String),
}

impl PipelineError {
    pub(crate) fn input(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::Input {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub(crate) fn output(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::Output {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "invalid_config",
            Self::Input { .. } => "unreadable_input",
            Self::Preprocess(_) | Self::Unproject(_) => "invalid_input",
            Self::Objective { .. } => "scorer_failure",
            Self::Output { .. } => "write_failure",
            Self::NoInputs(_) => "no_inputs",
        }
    }

    /// The error as a JSON object: `{"error": {"kind": ..., "message": ...}}`.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
        }
        serde_json::json!({ "error": Body { kind: self.kind(), message: self.to_string() } })
    }
}
