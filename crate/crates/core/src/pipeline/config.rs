//! Pipeline configuration: a TOML file of flat dotted keys.
//!
//! Every key can also be overridden from the command line as `key=value`,
//! where `value` uses TOML syntax (`bounds.tx=[-0.2, 0.2]`, `stop.window=300`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::camera::{BaseCamera, BoundsError, SearchBounds, PARAM_NAMES};
use crate::ingest::DEFAULT_BASE_FOVY;
use crate::objective::{
    ConstantScorer, HttpScorer, MeanLuminanceScorer, Scorer, SplatPolicy, ThirdsScorer, DEFAULT_LAMBDA_MASK,
};
use crate::optimize::{StopRule, StopRuleError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {key}: {reason}")]
    BadValue { key: String, reason: String },
    #[error("override {0:?} must look like key=value")]
    BadOverride(String),
    #[error("scene needs exactly one source: an image+depth pair or a PLY cloud")]
    SceneSource,
    #[error("a PLY scene needs camera.width and camera.height")]
    PlyNeedsDims,
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    StopRule(#[from] StopRuleError),
}

/// Which scorer to plug into the objective.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ScorerChoice {
    Thirds,
    MeanLuminance,
    Constant(f64),
    Http(String),
}

impl ScorerChoice {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "thirds" {
            Ok(Self::Thirds)
        } else if s == "mean_luminance" {
            Ok(Self::MeanLuminance)
        } else if let Some(v) = s.strip_prefix("constant:") {
            v.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Self::Constant)
                .ok_or_else(|| format!("bad constant {v:?}"))
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(Self::Http(s.to_string()))
        } else {
            Err(format!(
                "unknown scorer {s:?}; expected thirds, mean_luminance, constant:<value> or an http:// endpoint"
            ))
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Thirds => "thirds".into(),
            Self::MeanLuminance => "mean_luminance".into(),
            Self::Constant(v) => format!("constant:{v}"),
            Self::Http(url) => url.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub image: Option<PathBuf>,
    pub depth: Option<PathBuf>,
    pub ply: Option<PathBuf>,
    pub depth_scale: f64,
    pub preprocess: bool,
    pub base_fovy: f64,
    pub base_width: Option<usize>,
    pub base_height: Option<usize>,
    pub bounds: SearchBounds,
    pub lambda_mask: f64,
    pub scorer: ScorerChoice,
    pub scorer_timeout_secs: f64,
    pub scorer_max_connections: usize,
    pub stop: StopRule,
    pub seed: u64,
    pub sigma0: f64,
    pub scaling: bool,
    pub downscale: usize,
    pub splat: SplatPolicy,
    pub output_dir: PathBuf,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            image: None,
            depth: None,
            ply: None,
            depth_scale: 0.001,
            preprocess: true,
            base_fovy: DEFAULT_BASE_FOVY,
            base_width: None,
            base_height: None,
            bounds: SearchBounds::default(),
            lambda_mask: DEFAULT_LAMBDA_MASK,
            scorer: ScorerChoice::Thirds,
            scorer_timeout_secs: 30.0,
            scorer_max_connections: 4,
            stop: StopRule::default(),
            seed: 0,
            sigma0: 0.25,
            scaling: true,
            downscale: 1,
            splat: SplatPolicy::Auto,
            output_dir: PathBuf::from("out"),
            workers: 4,
        }
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, toml::Value)>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64, ConfigError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, format!("expected a number, got {v}"))),
    }
}

fn as_usize(key: &str, v: &toml::Value) -> Result<usize, ConfigError> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(bad(key, format!("expected a non-negative integer, got {v}"))),
    }
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| bad(key, format!("expected a string, got {v}")))
}

fn as_bool(key: &str, v: &toml::Value) -> Result<bool, ConfigError> {
    v.as_bool().ok_or_else(|| bad(key, format!("expected true or false, got {v}")))
}

fn as_path(key: &str, v: &toml::Value) -> Result<Option<PathBuf>, ConfigError> {
    let s = as_str(key, v)?;
    Ok((!s.is_empty()).then(|| PathBuf::from(s)))
}

/// TOML float literal that always carries a decimal point.
fn float_lit(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_toml_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Relative scene paths resolve against the config file's directory.
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.image, &mut cfg.depth, &mut cfg.ply].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn apply_toml_str(&mut self, text: &str) -> Result<(), ConfigError> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut pairs = Vec::new();
        flatten("", &toml::Value::Table(value), &mut pairs);
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        self.validate()
    }

    /// Cross-key checks; call after the last override.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.stop.validate()?;
        Ok(())
    }

    /// Applies a `key=value` override. Cross-key consistency is checked by
    /// [`PipelineConfig::validate`], so overrides may come in any order.
    pub fn apply_override(&mut self, arg: &str) -> Result<(), ConfigError> {
        let (key, raw) = arg
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(arg.to_string()))?;
        let key = key.trim();
        let raw = raw.trim();
        let doc = format!("v = {raw}");
        let value = match doc.parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("parsed key present"),
            // Bare words are taken as strings so `objective.scorer=thirds` works.
            Err(_) => toml::Value::String(raw.to_string()),
        };
        self.set(key, &value)
    }

    pub fn set(&mut self, key: &str, v: &toml::Value) -> Result<(), ConfigError> {
        if let Some(name) = key.strip_prefix("bounds.") {
            let i = PARAM_NAMES
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
            let arr = v
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| bad(key, "expected [lo, hi]"))?;
            let mut ranges = *self.bounds.ranges();
            ranges[i] = (as_f64(key, &arr[0])?, as_f64(key, &arr[1])?);
            self.bounds = SearchBounds::new(ranges)?;
            return Ok(());
        }
        match key {
            "scene.image" => self.image = as_path(key, v)?,
            "scene.depth" => self.depth = as_path(key, v)?,
            "scene.ply" => self.ply = as_path(key, v)?,
            "scene.depth_scale" => {
                let s = as_f64(key, v)?;
                if !(s > 0.0 && s.is_finite()) {
                    return Err(bad(key, "must be positive"));
                }
                self.depth_scale = s;
            }
            "scene.preprocess" => self.preprocess = as_bool(key, v)?,
            "camera.base_fovy" => {
                let f = as_f64(key, v)?;
                if !(f > 10.0 && f < 120.0) {
                    return Err(bad(key, "must lie in (10, 120) degrees"));
                }
                self.base_fovy = f;
            }
            "camera.width" => self.base_width = Some(as_usize(key, v)?).filter(|&w| w > 0),
            "camera.height" => self.base_height = Some(as_usize(key, v)?).filter(|&h| h > 0),
            "objective.lambda_mask" => {
                let l = as_f64(key, v)?;
                if !(l >= 0.0 && l.is_finite()) {
                    return Err(bad(key, "must be non-negative"));
                }
                self.lambda_mask = l;
            }
            "objective.scorer" => self.scorer = ScorerChoice::parse(as_str(key, v)?).map_err(|r| bad(key, r))?,
            "objective.timeout_secs" => {
                let t = as_f64(key, v)?;
                if !(t > 0.0 && t.is_finite()) {
                    return Err(bad(key, "must be positive"));
                }
                self.scorer_timeout_secs = t;
            }
            "objective.max_connections" => self.scorer_max_connections = as_usize(key, v)?.max(1),
            "stop.max_evaluations" => self.stop.max_evaluations = as_usize(key, v)?,
            "stop.window" => self.stop.window = as_usize(key, v)?,
            "stop.min_improvement" => self.stop.min_improvement = as_f64(key, v)?,
            "optimize.seed" => self.seed = as_usize(key, v)? as u64,
            "optimize.sigma0" => {
                let s = as_f64(key, v)?;
                if !(s > 0.0 && s.is_finite()) {
                    return Err(bad(key, "must be positive"));
                }
                self.sigma0 = s;
            }
            "optimize.scaling" => self.scaling = as_bool(key, v)?,
            "optimize.downscale" => {
                let d = as_usize(key, v)?;
                if d == 0 {
                    return Err(bad(key, "must be at least 1"));
                }
                self.downscale = d;
            }
            "render.splat_radius" => {
                self.splat = match v {
                    toml::Value::String(s) if s == "auto" => SplatPolicy::Auto,
                    toml::Value::Integer(r) if *r >= 0 => SplatPolicy::Fixed(*r as u32),
                    _ => return Err(bad(key, "expected \"auto\" or a non-negative integer")),
                }
            }
            "output.dir" => {
                self.output_dir = PathBuf::from(as_str(key, v)?);
            }
            "batch.workers" => self.workers = as_usize(key, v)?.max(1),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Checks the scene source for a single run.
    pub fn validate_scene(&self) -> Result<(), ConfigError> {
        let rgbd = self.image.is_some() && self.depth.is_some();
        let partial = self.image.is_some() != self.depth.is_some();
        let ply = self.ply.is_some();
        if partial || rgbd == ply {
            return Err(ConfigError::SceneSource);
        }
        if ply && (self.base_width.is_none() || self.base_height.is_none()) {
            return Err(ConfigError::PlyNeedsDims);
        }
        Ok(())
    }

    pub fn build_scorer(&self) -> Arc<dyn Scorer> {
        match &self.scorer {
            ScorerChoice::Thirds => Arc::new(ThirdsScorer),
            ScorerChoice::MeanLuminance => Arc::new(MeanLuminanceScorer),
            ScorerChoice::Constant(v) => Arc::new(ConstantScorer::new(*v)),
            ScorerChoice::Http(url) => Arc::new(HttpScorer::new(
                url,
                Duration::from_secs_f64(self.scorer_timeout_secs),
                self.scorer_max_connections,
            )),
        }
    }

    /// Base camera for a PLY scene, when both dimensions are configured.
    pub fn configured_base(&self) -> Option<BaseCamera> {
        Some(BaseCamera {
            fovy_deg: self.base_fovy,
            width: self.base_width?,
            height: self.base_height?,
        })
    }

    /// Serializes every key, one per line, in a stable order.
    pub fn to_toml(&self) -> String {
        let path = |p: &Option<PathBuf>| format!("{:?}", p.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        let mut s = String::new();
        let _ = writeln!(s, "# reframe pipeline configuration (flat dotted keys)");
        let _ = writeln!(s, "scene.image = {}", path(&self.image));
        let _ = writeln!(s, "scene.depth = {}", path(&self.depth));
        let _ = writeln!(s, "scene.ply = {}", path(&self.ply));
        let _ = writeln!(s, "scene.depth_scale = {}", float_lit(self.depth_scale));
        let _ = writeln!(s, "scene.preprocess = {}", self.preprocess);
        let _ = writeln!(s, "camera.base_fovy = {}", float_lit(self.base_fovy));
        if let Some(w) = self.base_width {
            let _ = writeln!(s, "camera.width = {w}");
        }
        if let Some(h) = self.base_height {
            let _ = writeln!(s, "camera.height = {h}");
        }
        for (name, &(lo, hi)) in PARAM_NAMES.iter().zip(self.bounds.ranges()) {
            let _ = writeln!(s, "bounds.{name} = [{}, {}]", float_lit(lo), float_lit(hi));
        }
        let _ = writeln!(s, "objective.lambda_mask = {}", float_lit(self.lambda_mask));
        let _ = writeln!(s, "objective.scorer = {:?}", self.scorer.label());
        let _ = writeln!(s, "objective.timeout_secs = {}", float_lit(self.scorer_timeout_secs));
        let _ = writeln!(s, "objective.max_connections = {}", self.scorer_max_connections);
        let _ = writeln!(s, "stop.max_evaluations = {}", self.stop.max_evaluations);
        let _ = writeln!(s, "stop.window = {}", self.stop.window);
        let _ = writeln!(s, "stop.min_improvement = {}", float_lit(self.stop.min_improvement));
        let _ = writeln!(s, "optimize.seed = {}", self.seed);
        let _ = writeln!(s, "optimize.sigma0 = {}", float_lit(self.sigma0));
        let _ = writeln!(s, "optimize.scaling = {}", self.scaling);
        let _ = writeln!(s, "optimize.downscale = {}", self.downscale);
        match self.splat {
            SplatPolicy::Auto => {
                let _ = writeln!(s, "render.splat_radius = \"auto\"");
            }
            SplatPolicy::Fixed(r) => {
                let _ = writeln!(s, "render.splat_radius = {r}");
            }
        }
        let _ = writeln!(s, "output.dir = {:?}", self.output_dir.display().to_string());
        let _ = writeln!(s, "batch.workers = {}", self.workers);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_lists_search_settings_verbatim() {
        let text = PipelineConfig::default().to_toml();
        for line in [
            "bounds.tx = [-0.1, 0.1]",
            "bounds.ty = [-0.1, 0.1]",
            "bounds.tz = [-0.5, 0.5]",
            "bounds.roll = [-10.0, 10.0]",
            "bounds.pitch = [-10.0, 10.0]",
            "bounds.yaw = [-10.0, 10.0]",
            "bounds.fovy_offset = [-10.0, 10.0]",
            "bounds.s_w = [0.1, 2.0]",
            "bounds.s_h = [0.1, 2.0]",
            "stop.max_evaluations = 2000",
            "stop.window = 500",
            "stop.min_improvement = 0.001",
            "objective.lambda_mask = 10.0",
        ] {
            assert!(text.lines().any(|l| l == line), "missing {line:?} in\n{text}");
        }
    }

    #[test]
    fn emitted_config_parses_back_to_itself() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_override("objective.scorer=constant:2.5").unwrap();
        cfg.apply_override("render.splat_radius=3").unwrap();
        cfg.apply_override("camera.width=640").unwrap();
        cfg.apply_override("camera.height=480").unwrap();
        cfg.apply_override("scene.ply=\"a b.ply\"").unwrap();
        let back = PipelineConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_use_toml_values() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_override("bounds.tx=[-0.2, 0.3]").unwrap();
        cfg.apply_override("stop.window = 300").unwrap();
        cfg.apply_override("objective.scorer=thirds").unwrap();
        assert_eq!(cfg.bounds.range(0), (-0.2, 0.3));
        assert_eq!(cfg.stop.window, 300);
        assert!(matches!(cfg.apply_override("nope=1"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(cfg.apply_override("stop.window"), Err(ConfigError::BadOverride(_))));
        cfg.apply_override("stop.window=5000").unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::StopRule(_))));
        cfg.apply_override("stop.max_evaluations=6000").unwrap();
        assert!(cfg.validate().is_ok());
        assert!(matches!(cfg.apply_override("bounds.yaw=[3, 1]"), Err(ConfigError::Bounds(_))));
        assert!(matches!(cfg.apply_override("objective.scorer=ven"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn nested_tables_flatten_to_dotted_keys() {
        let cfg = PipelineConfig::from_toml_str("[stop]\nwindow = 100\n[objective]\nlambda_mask = 2\n").unwrap();
        assert_eq!(cfg.stop.window, 100);
        assert_eq!(cfg.lambda_mask, 2.0);
    }

    #[test]
    fn scene_source_is_exclusive() {
        let mut cfg = PipelineConfig::default();
        assert!(matches!(cfg.validate_scene(), Err(ConfigError::SceneSource)));
        cfg.image = Some("a.png".into());
        assert!(matches!(cfg.validate_scene(), Err(ConfigError::SceneSource)));
        cfg.depth = Some("a.depth.png".into());
        assert!(cfg.validate_scene().is_ok());
        cfg.ply = Some("a.ply".into());
        assert!(matches!(cfg.validate_scene(), Err(ConfigError::SceneSource)));
        cfg.image = None;
        cfg.depth = None;
        assert!(matches!(cfg.validate_scene(), Err(ConfigError::PlyNeedsDims)));
    }
}
