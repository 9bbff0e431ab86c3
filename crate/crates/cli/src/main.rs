use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use reframe::camera::{to_render_spec, CameraParams};
use reframe::image::save_mask_png;
use reframe::ingest::{save_ply, PlyEncoding};
use reframe::pipeline::{load_scene, run_ablation, run_batch, run_single, PipelineConfig, PipelineError};
use reframe::render::render;
use reframe::synthetic::{fixture_scenes, write_scene};

/// Recompose a photo by searching camera parameters over its point cloud.
#[derive(Parser)]
#[command(name = "reframe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file with flat dotted keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set stop.window=300`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the view of one scene and write its artifacts.
    Run(ConfigArgs),
    /// Optimize every scene under a directory and write report.csv/report.json.
    Batch {
        dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compare input, local ascent, CMA-ES and CMA-ES with scaling over a directory.
    Ablate {
        dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render the configured scene at given parameters without optimizing.
    Render {
        #[command(flatten)]
        config: ConfigArgs,
        /// JSON camera parameters, bare or as written to best_params.json. Identity if omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(short, long, default_value = "render.png")]
        output: PathBuf,
        /// Also write the coverage mask.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Also write the reconstructed point cloud as binary PLY.
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Print the default configuration.
    InitConfig {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the bundled synthetic fixture scenes.
    Synth { dir: PathBuf },
}

fn fail(kind: &str, message: String) -> ExitCode {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{body}");
    ExitCode::from(1)
}

fn pipeline_fail(e: &PipelineError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(1)
}

/// Exit status 2 flags a run in which some inputs failed.
const PARTIAL_FAILURE: u8 = 2;

fn read_params(path: &Path) -> anyhow::Result<CameraParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))?;
    let inner = value.get("params").cloned().unwrap_or(value);
    serde_json::from_value(inner).with_context(|| format!("{} does not hold camera parameters", path.display()))
}

fn render_cmd(cfg: &PipelineConfig, params: Option<&Path>, output: &Path, mask: Option<&Path>, cloud: Option<&Path>) -> ExitCode {
    let params = match params.map(read_params).transpose() {
        Ok(p) => p.unwrap_or_else(CameraParams::identity),
        Err(e) => return fail("invalid_params", format!("{e:#}")),
    };
    let scene = match load_scene(cfg) {
        Ok(s) => s,
        Err(e) => return pipeline_fail(&e),
    };
    let spec = to_render_spec(&params, &scene.base);
    let out = render(&scene.cloud, &spec, cfg.splat.radius(&spec, &scene.base));
    if let Err(e) = out.color.save_png(output) {
        return fail("write_failure", format!("cannot write {}: {e}", output.display()));
    }
    if let Some(m) = mask {
        if let Err(e) = save_mask_png(out.mask.width(), out.mask.height(), out.mask.values(), m) {
            return fail("write_failure", format!("cannot write {}: {e}", m.display()));
        }
    }
    if let Some(c) = cloud {
        if let Err(e) = save_ply(&scene.cloud, c, PlyEncoding::BinaryLittleEndian) {
            return fail("write_failure", format!("cannot write {}: {e}", c.display()));
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let result = args.load().and_then(|cfg| run_single(&cfg));
            match result {
                Ok(r) => {
                    println!("{}", serde_json::to_string(&r.summary).expect("summary serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => pipeline_fail(&e),
            }
        }
        Command::Batch { dir, config } => match config.load().and_then(|cfg| run_batch(&dir, &cfg)) {
            Ok(b) => {
                for a in &b.report.aggregates {
                    println!(
                        "{}: {} images, input {:.4} -> optimized {:.4}",
                        a.dataset, a.images, a.input_total, a.optimized_total
                    );
                }
                for f in &b.report.failures {
                    eprintln!("{}", serde_json::to_string(f).expect("failure serializes"));
                }
                if b.has_failures() {
                    ExitCode::from(PARTIAL_FAILURE)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => pipeline_fail(&e),
        },
        Command::Ablate { dir, config } => match config.load().and_then(|cfg| run_ablation(&dir, &cfg)) {
            Ok(t) => {
                print!("{}", t.to_text());
                for f in &t.failures {
                    eprintln!("{}", serde_json::to_string(f).expect("failure serializes"));
                }
                if t.failures.is_empty() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(PARTIAL_FAILURE)
                }
            }
            Err(e) => pipeline_fail(&e),
        },
        Command::Render {
            config,
            params,
            output,
            mask,
            cloud,
        } => match config.load() {
            Ok(cfg) => render_cmd(&cfg, params.as_deref(), &output, mask.as_deref(), cloud.as_deref()),
            Err(e) => pipeline_fail(&e),
        },
        Command::InitConfig { output } => {
            let text = PipelineConfig::default().to_toml();
            match output {
                Some(p) => match std::fs::write(&p, text) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail("write_failure", format!("cannot write {}: {e}", p.display())),
                },
                None => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
            }
        }
        Command::Synth { dir } => {
            if let Err(e) = std::fs::create_dir_all(&dir) {
                return fail("write_failure", format!("cannot create {}: {e}", dir.display()));
            }
            for scene in fixture_scenes() {
                if let Err(e) = write_scene(&scene, &dir) {
                    return fail("write_failure", e.to_string());
                }
                println!("{}", dir.join(format!("{}.png", scene.name)).display());
            }
            ExitCode::SUCCESS
        }
    }
}
