//! Directory-level runs: the batch report and the ablation table.
//!
//! Inputs are discovered recursively. `<stem>.png` pairs with
//! `<stem>.depth.png` or `<stem>.depth.f32`; `<stem>.ply` stands alone. The
//! directory an input sits in, relative to the batch root, names its dataset.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::objective::Scorer;

use super::config::PipelineConfig;
use super::report::{write_timings, AblationTable, FailureRecord, ReportRow, RunReport, TimingRecord, ROOT_DATASET};
use super::run::{ablate_scene, run_scene};
use super::scene::{load_scene, Scene};
use super::PipelineError;

#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    Rgbd { image: PathBuf, depth: PathBuf },
    Ply(PathBuf),
    /// An image with no depth map beside it.
    MissingDepth(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchInput {
    pub dataset: String,
    pub name: String,
    pub source: InputSource,
}

const DEPTH_SUFFIXES: [&str; 2] = [".depth.png", ".depth.f32"];

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<BatchInput>) -> Result<(), PipelineError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| PipelineError::input(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| !file_name(p).starts_with('.'))
        .collect();
    entries.sort();
    let dataset = match dir.strip_prefix(root) {
        Ok(rel) if !rel.as_os_str().is_empty() => rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/"),
        _ => ROOT_DATASET.to_string(),
    };
    for path in &entries {
        if path.is_dir() {
            collect(root, path, out)?;
            continue;
        }
        let name = file_name(path);
        if DEPTH_SUFFIXES.iter().any(|s| name.ends_with(s)) {
            continue;
        }
        let source = if let Some(stem) = name.strip_suffix(".png") {
            let depth = DEPTH_SUFFIXES
                .iter()
                .map(|s| dir.join(format!("{stem}{s}")))
                .find(|p| p.is_file());
            match depth {
                Some(depth) => InputSource::Rgbd {
                    image: path.clone(),
                    depth,
                },
                None => InputSource::MissingDepth(path.clone()),
            }
        } else if name.ends_with(".ply") {
            InputSource::Ply(path.clone())
        } else {
            continue;
        };
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.push(BatchInput {
            dataset: dataset.clone(),
            name: stem,
            source,
        });
    }
    Ok(())
}

/// Lists inputs under `dir`, sorted by dataset and then by file name.
pub fn discover_inputs(dir: &Path) -> Result<Vec<BatchInput>, PipelineError> {
    let mut out = Vec::new();
    collect(dir, dir, &mut out)?;
    out.sort_by(|a, b| (&a.dataset, &a.name).cmp(&(&b.dataset, &b.name)));
    if out.is_empty() {
        return Err(PipelineError::NoInputs(dir.display().to_string()));
    }
    Ok(out)
}

fn load_input(input: &BatchInput, config: &PipelineConfig) -> Result<Scene, PipelineError> {
    let mut cfg = config.clone();
    cfg.image = None;
    cfg.depth = None;
    cfg.ply = None;
    match &input.source {
        InputSource::Rgbd { image, depth } => {
            cfg.image = Some(image.clone());
            cfg.depth = Some(depth.clone());
        }
        InputSource::Ply(p) => cfg.ply = Some(p.clone()),
        InputSource::MissingDepth(p) => {
            return Err(PipelineError::input(p, "no matching .depth.png or .depth.f32 file"));
        }
    }
    load_scene(&cfg)
}

fn failure(input: &BatchInput, e: &PipelineError) -> FailureRecord {
    FailureRecord {
        dataset: input.dataset.clone(),
        name: input.name.clone(),
        kind: e.kind().to_string(),
        error: e.to_string(),
    }
}

fn item_dir(out: &Path, input: &BatchInput) -> PathBuf {
    if input.dataset == ROOT_DATASET {
        out.join(&input.name)
    } else {
        out.join(&input.dataset).join(&input.name)
    }
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool starts")
}

#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub report: RunReport,
    pub timings: Vec<TimingRecord>,
}

impl BatchOutcome {
    pub fn has_failures(&self) -> bool {
        !self.report.failures.is_empty()
    }
}

/// Runs every input under `dir`, writing per-image artifacts to
/// `<output>/<dataset>/<name>/` and `report.csv`, `report.json`, `timings.csv`
/// to the output directory. Failed inputs become failure records.
pub fn run_batch(dir: &Path, config: &PipelineConfig) -> Result<BatchOutcome, PipelineError> {
    config.validate()?;
    let inputs = discover_inputs(dir)?;
    let scorer: Arc<dyn Scorer> = config.build_scorer();
    let out = &config.output_dir;
    let results: Vec<_> = pool(config.workers).install(|| {
        inputs
            .par_iter()
            .map(|input| {
                let scene = load_input(input, config)?;
                run_scene(&input.name, &scene, config, &scorer, &item_dir(out, input))
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut timings = Vec::new();
    for (input, result) in inputs.iter().zip(results) {
        match result {
            Ok(r) => {
                rows.push(ReportRow::from_summary(&input.dataset, &r.summary));
                timings.push(TimingRecord {
                    dataset: input.dataset.clone(),
                    name: input.name.clone(),
                    wall_time_secs: r.wall_time_secs,
                });
            }
            Err(e) => failures.push(failure(input, &e)),
        }
    }
    let report = RunReport::new(rows, failures);
    report.write(out)?;
    write_timings(out, &timings)?;
    Ok(BatchOutcome { report, timings })
}

/// Runs all four methods on every input under `dir` and writes
/// `ablation.csv`, `ablation.txt` and `ablation.json` to the output directory.
pub fn run_ablation(dir: &Path, config: &PipelineConfig) -> Result<AblationTable, PipelineError> {
    config.validate()?;
    let inputs = discover_inputs(dir)?;
    let scorer: Arc<dyn Scorer> = config.build_scorer();
    let results: Vec<_> = pool(config.workers).install(|| {
        inputs
            .par_iter()
            .map(|input| {
                let scene = load_input(input, config)?;
                ablate_scene(&scene, config, &scorer)
            })
            .collect()
    });
    let mut images = Vec::new();
    let mut failures = Vec::new();
    for (input, result) in inputs.iter().zip(results) {
        match result {
            Ok(a) => images.push((input.dataset.clone(), a.totals())),
            Err(e) => failures.push(failure(input, &e)),
        }
    }
    let table = AblationTable::from_images(&images, failures);
    table.write(&config.output_dir)?;
    Ok(table)
}
