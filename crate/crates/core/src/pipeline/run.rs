//! Single-scene optimization and artifact emission.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::camera::{output_dims, CameraParams, PARAM_COUNT};
use crate::image::save_mask_png;
use crate::objective::{render_view, EvalError, ObjectiveValue, Scorer, SearchSpace, SplatPolicy, ViewObjective};
use crate::optimize::{
    cma_optimize, local_ascent, CmaConfig, LocalAscentConfig, Objective, OptimizeError, Outcome, Termination,
};

use super::config::PipelineConfig;
use super::scene::{load_scene, Scene};
use super::PipelineError;

/// The four rows of the ablation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Input,
    LocalAscent,
    Cma,
    CmaScaling,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Input, Method::LocalAscent, Method::Cma, Method::CmaScaling];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Input => "input",
            Self::LocalAscent => "local-ascent",
            Self::Cma => "CMA-ES",
            Self::CmaScaling => "CMA-ES + scaling",
        }
    }
}

fn view_objective(scene: &Scene, config: &PipelineConfig, scorer: &Arc<dyn Scorer>, space: SearchSpace) -> ViewObjective {
    ViewObjective {
        cloud: Arc::clone(&scene.cloud),
        base: scene.search_base(config.downscale),
        bounds: config.bounds,
        scorer: Arc::clone(scorer),
        lambda_mask: config.lambda_mask,
        splat: config.splat,
        space,
    }
}

fn objective_error(e: OptimizeError<EvalError>) -> PipelineError {
    PipelineError::Objective {
        evaluation: e.at,
        source: e.source,
    }
}

fn cma_config(config: &PipelineConfig) -> CmaConfig {
    CmaConfig {
        sigma0: config.sigma0,
        ..CmaConfig::default()
    }
}

/// Objective of the unmodified capture view at search resolution.
pub fn input_value(scene: &Scene, config: &PipelineConfig, scorer: &Arc<dyn Scorer>) -> Result<ObjectiveValue, PipelineError> {
    let obj = view_objective(scene, config, scorer, SearchSpace::Full);
    let x = obj.encode(&CameraParams::identity());
    obj.evaluate(&x)
        .map_err(|source| PipelineError::Objective { evaluation: 0, source })
}

#[derive(Clone, Debug)]
pub struct ScalingComparison {
    /// Seven-parameter search with both scale coefficients held at 1.
    pub frozen: Outcome,
    /// Nine-parameter search, seeded with the frozen best.
    pub full: Outcome,
}

impl ScalingComparison {
    pub fn frozen_params(&self, config: &PipelineConfig) -> CameraParams {
        decode(config, SearchSpace::FrozenScaling, &self.frozen.best_x)
    }

    pub fn full_params(&self, config: &PipelineConfig) -> CameraParams {
        decode(config, SearchSpace::Full, &self.full.best_x)
    }
}

fn decode(config: &PipelineConfig, space: SearchSpace, x: &[f64]) -> CameraParams {
    let mut full = config.bounds.encode(&CameraParams::identity());
    full[..space.dim()].copy_from_slice(x);
    config.bounds.decode(&full)
}

fn optimize_frozen(scene: &Scene, config: &PipelineConfig, scorer: &Arc<dyn Scorer>) -> Result<Outcome, PipelineError> {
    let obj = view_objective(scene, config, scorer, SearchSpace::FrozenScaling);
    let start = obj.encode(&CameraParams::identity());
    cma_optimize(&obj, &start, &[], &config.stop, &cma_config(config), config.seed).map_err(objective_error)
}

/// Runs the frozen-scaling search, then the full search seeded with its best.
///
/// Both searches start from the capture view. The full search also evaluates
/// the frozen optimum (with unit scales) before its first generation, so its
/// best is never below the frozen best.
pub fn optimize_with_and_without_scaling(
    scene: &Scene,
    config: &PipelineConfig,
    scorer: &Arc<dyn Scorer>,
) -> Result<ScalingComparison, PipelineError> {
    let frozen = optimize_frozen(scene, config, scorer)?;
    let obj = view_objective(scene, config, scorer, SearchSpace::Full);
    let start = obj.encode(&CameraParams::identity());
    let seed_point = config
        .bounds
        .encode(&decode(config, SearchSpace::FrozenScaling, &frozen.best_x))
        .to_vec();
    let full = cma_optimize(&obj, &start, &[seed_point], &config.stop, &cma_config(config), config.seed)
        .map_err(objective_error)?;
    Ok(ScalingComparison { frozen, full })
}

/// Finite-difference baseline over all nine parameters, same evaluation budget.
pub fn optimize_local(scene: &Scene, config: &PipelineConfig, scorer: &Arc<dyn Scorer>) -> Result<Outcome, PipelineError> {
    let obj = view_objective(scene, config, scorer, SearchSpace::Full);
    let start = obj.encode(&CameraParams::identity());
    let cfg = LocalAscentConfig::for_budget(PARAM_COUNT, config.stop.max_evaluations);
    local_ascent(&obj, &start, &cfg).map_err(objective_error)
}

/// Everything the ablation table needs for one scene.
#[derive(Clone, Debug)]
pub struct AblationScene {
    pub input: ObjectiveValue,
    pub local: Outcome,
    pub scaling: ScalingComparison,
}

impl AblationScene {
    /// Best totals in [`Method::ALL`] order.
    pub fn totals(&self) -> [f64; 4] {
        [
            self.input.total,
            self.local.best.total,
            self.scaling.frozen.best.total,
            self.scaling.full.best.total,
        ]
    }
}

pub fn ablate_scene(scene: &Scene, config: &PipelineConfig, scorer: &Arc<dyn Scorer>) -> Result<AblationScene, PipelineError> {
    Ok(AblationScene {
        input: input_value(scene, config, scorer)?,
        local: optimize_local(scene, config, scorer)?,
        scaling: optimize_with_and_without_scaling(scene, config, scorer)?,
    })
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub scene: String,
    pub scorer: String,
    pub seed: u64,
    pub scaling: bool,
    pub input: ObjectiveValue,
    pub optimized: ObjectiveValue,
    /// Best total of the frozen-scaling stage when scaling is enabled.
    pub frozen_scaling_best_total: Option<f64>,
    pub best_params: CameraParams,
    pub output_width: usize,
    pub output_height: usize,
    pub evaluations: usize,
    pub termination: Option<Termination>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub summary: RunSummary,
    pub wall_time_secs: f64,
    pub output_dir: PathBuf,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    stage: &'static str,
    index: usize,
    params: CameraParams,
    x: &'a [f64],
    score: f64,
    mask_loss: f64,
    total: f64,
    best_total: f64,
}

#[derive(Serialize)]
struct BestParamsFile {
    params: CameraParams,
    output_width: usize,
    output_height: usize,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::output(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| PipelineError::output(path, e))
}

fn write_trace(path: &Path, config: &PipelineConfig, stages: &[(&'static str, SearchSpace, &Outcome)]) -> Result<(), PipelineError> {
    let err = |e: &dyn std::fmt::Display| PipelineError::output(path, e);
    let file = File::create(path).map_err(|e| err(&e))?;
    let mut out = BufWriter::new(file);
    for &(stage, space, outcome) in stages {
        for r in &outcome.trace.records {
            let line = TraceLine {
                stage,
                index: r.index,
                params: decode(config, space, &r.x),
                x: &r.x,
                score: r.score,
                mask_loss: r.mask_loss,
                total: r.total,
                best_total: r.best_total,
            };
            serde_json::to_writer(&mut out, &line).map_err(|e| err(&e))?;
            out.write_all(b"\n").map_err(|e| err(&e))?;
        }
    }
    out.flush().map_err(|e| err(&e))
}

/// Optimizes one scene and writes its artifacts into `out_dir`:
/// `optimized.png`, `optimized_mask.png`, `input_view.png`, `best_params.json`,
/// `trace.jsonl`, `summary.json` and `timing.json`.
pub fn run_scene(
    name: &str,
    scene: &Scene,
    config: &PipelineConfig,
    scorer: &Arc<dyn Scorer>,
    out_dir: &Path,
) -> Result<RunResult, PipelineError> {
    let started = Instant::now();
    fs::create_dir_all(out_dir).map_err(|e| PipelineError::output(out_dir, e))?;

    let (best_params, best, frozen_total, evaluations, termination, stages) = if config.scaling {
        let cmp = optimize_with_and_without_scaling(scene, config, scorer)?;
        let params = cmp.full_params(config);
        let best = ObjectiveValue::new(cmp.full.best.score, cmp.full.best.mask_loss, config.lambda_mask);
        let evals = cmp.frozen.trace.len() + cmp.full.trace.len();
        let term = cmp.full.trace.termination;
        let frozen_total = Some(cmp.frozen.best.total);
        (params, best, frozen_total, evals, term, vec![("frozen_scaling", cmp.frozen), ("full", cmp.full)])
    } else {
        let frozen = optimize_frozen(scene, config, scorer)?;
        let params = decode(config, SearchSpace::FrozenScaling, &frozen.best_x);
        let best = ObjectiveValue::new(frozen.best.score, frozen.best.mask_loss, config.lambda_mask);
        let evals = frozen.trace.len();
        let term = frozen.trace.termination;
        (params, best, None, evals, term, vec![("frozen_scaling", frozen)])
    };
    // The capture view is the first evaluation of every search.
    let first = &stages[0].1.trace.records[0];
    let input = ObjectiveValue::new(first.score, first.mask_loss, config.lambda_mask);

    let final_render = render_view(&scene.cloud, &best_params, &scene.base, SplatPolicy::Auto);
    let input_render = render_view(&scene.cloud, &CameraParams::identity(), &scene.base, SplatPolicy::Auto);
    let path = out_dir.join("optimized.png");
    final_render.color.save_png(&path).map_err(|e| PipelineError::output(&path, e))?;
    let path = out_dir.join("optimized_mask.png");
    save_mask_png(final_render.mask.width(), final_render.mask.height(), final_render.mask.values(), &path)
        .map_err(|e| PipelineError::output(&path, e))?;
    let path = out_dir.join("input_view.png");
    input_render.color.save_png(&path).map_err(|e| PipelineError::output(&path, e))?;

    let (output_width, output_height) = output_dims(&best_params, scene.base.width, scene.base.height);
    write_json(
        &out_dir.join("best_params.json"),
        &BestParamsFile {
            params: best_params,
            output_width,
            output_height,
        },
    )?;
    let staged: Vec<_> = stages
        .iter()
        .map(|(name, outcome)| {
            let space = if *name == "full" { SearchSpace::Full } else { SearchSpace::FrozenScaling };
            (*name, space, outcome)
        })
        .collect();
    write_trace(&out_dir.join("trace.jsonl"), config, &staged)?;

    let summary = RunSummary {
        scene: name.to_string(),
        scorer: scorer.name().to_string(),
        seed: config.seed,
        scaling: config.scaling,
        input,
        optimized: best,
        frozen_scaling_best_total: frozen_total,
        best_params,
        output_width,
        output_height,
        evaluations,
        termination,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    let wall_time_secs = started.elapsed().as_secs_f64();
    write_json(&out_dir.join("timing.json"), &serde_json::json!({ "wall_time_secs": wall_time_secs }))?;
    Ok(RunResult {
        summary,
        wall_time_secs,
        output_dir: out_dir.to_path_buf(),
    })
}

/// Scene name for a single run: the file stem of its source.
fn scene_name(config: &PipelineConfig) -> String {
    config
        .image
        .as_ref()
        .or(config.ply.as_ref())
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".to_string())
}

pub fn run_single(config: &PipelineConfig) -> Result<RunResult, PipelineError> {
    config.validate()?;
    let scene = load_scene(config)?;
    let scorer = config.build_scorer();
    run_scene(&scene_name(config), &scene, config, &scorer, &config.output_dir)
}
