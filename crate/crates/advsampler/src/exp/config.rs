//! Experiment configuration: JSON files with per-mode defaults and strict key
//! validation.
//!
//! Parsing pipeline: read the user's JSON object, check every provided key is
//! known *and applicable to the selected mode*, overlay it on the mode- and
//! target-specific defaults (nested objects replace wholesale), apply any
//! `--set key=value` dotted overrides, then deserialize strictly.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dist::{target_by_id, ReferenceFamily};
use crate::error::{Error, Result};
use crate::gan::CriticObjective;
use crate::metrics::GridSpec;
use crate::ras::EntropyRegularizer;
use crate::schedule::BetaSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    TrainGan,
    TrainRas,
    Constrained,
    Svgd,
    AmortizedSvgd,
    Sql,
    Eval,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::TrainGan => "train_gan",
            Mode::TrainRas => "train_ras",
            Mode::Constrained => "constrained",
            Mode::Svgd => "svgd",
            Mode::AmortizedSvgd => "amortized_svgd",
            Mode::Sql => "sql",
            Mode::Eval => "eval",
        }
    }

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "train_gan" => Ok(Mode::TrainGan),
            "train_ras" => Ok(Mode::TrainRas),
            "constrained" => Ok(Mode::Constrained),
            "svgd" => Ok(Mode::Svgd),
            "amortized_svgd" => Ok(Mode::AmortizedSvgd),
            "sql" => Ok(Mode::Sql),
            "eval" => Ok(Mode::Eval),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// A fully-resolved experiment. Every field is concrete; the manifest echoes
/// this struct verbatim, so a run is reconstructible from its manifest alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub target: String,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,

    // Adversarial training.
    pub objective: CriticObjective,
    pub regularizer: EntropyRegularizer,
    pub schedule: BetaSchedule,
    pub reference: ReferenceFamily,
    pub iterations: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub critic_steps: u32,
    pub refit_interval: u64,
    pub f2_clamp: f64,
    /// `null` trains on fresh target draws; a number trains on a fixed
    /// dataset of that size (sample-based mode only).
    pub dataset_size: Option<usize>,
    pub noise_dim: usize,
    pub generator_layers: Vec<usize>,
    pub critic_layers: Vec<usize>,
    pub inverse_layers: Vec<usize>,
    pub q_layers: Vec<usize>,
    pub eval_interval: u64,
    pub eval_samples: usize,
    pub final_samples: usize,
    pub grid: GridSpec,

    // Particle baselines.
    pub particles: usize,
    pub svgd_steps: u64,
    pub svgd_step_size: f64,
    pub snapshot_interval: u64,

    // Soft Q-learning.
    pub env_steps: u64,
    pub m_samples: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub buffer_capacity: usize,
    pub warmup: usize,
    pub sync_interval: u64,
    pub eval_rollouts: usize,

    // Eval mode.
    pub samples_path: Option<PathBuf>,
}

const COMMON_KEYS: &[&str] = &["mode", "target", "seeds", "out_dir"];
const ADVERSARIAL_KEYS: &[&str] = &[
    "objective",
    "regularizer",
    "schedule",
    "iterations",
    "batch_size",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "critic_steps",
    "noise_dim",
    "generator_layers",
    "critic_layers",
    "inverse_layers",
    "eval_interval",
    "eval_samples",
    "final_samples",
    "grid",
];

fn allowed_keys(mode: Mode) -> BTreeSet<&'static str> {
    let mut keys: BTreeSet<&'static str> = COMMON_KEYS.iter().copied().collect();
    match mode {
        Mode::TrainGan => {
            keys.extend(ADVERSARIAL_KEYS);
            keys.insert("dataset_size");
        }
        Mode::TrainRas | Mode::Constrained => {
            keys.extend(ADVERSARIAL_KEYS);
            keys.extend(["reference", "refit_interval", "f2_clamp"]);
        }
        Mode::Svgd => {
            keys.extend(["particles", "svgd_steps", "svgd_step_size", "snapshot_interval", "grid"]);
        }
        Mode::AmortizedSvgd => {
            keys.extend([
                "iterations",
                "batch_size",
                "learning_rate",
                "adam_beta1",
                "adam_beta2",
                "adam_epsilon",
                "svgd_step_size",
                "generator_layers",
                "noise_dim",
                "eval_interval",
                "eval_samples",
                "final_samples",
                "grid",
            ]);
        }
        Mode::Sql => {
            keys.extend([
                "env_steps",
                "batch_size",
                "learning_rate",
                "adam_beta1",
                "adam_beta2",
                "adam_epsilon",
                "m_samples",
                "gamma",
                "alpha",
                "buffer_capacity",
                "warmup",
                "sync_interval",
                "eval_interval",
                "eval_rollouts",
                "schedule",
                "f2_clamp",
                "generator_layers",
                "critic_layers",
                "inverse_layers",
                "q_layers",
            ]);
        }
        Mode::Eval => {
            keys.extend(["samples_path", "grid", "eval_samples"]);
        }
    }
    keys
}

/// The built-in defaults for a `(mode, target)` pair, as a complete JSON
/// object. User keys overlay these.
pub fn default_config_value(mode: Mode, target: &str) -> Result<Value> {
    // Target geometry drives grids, bounds, and network shapes.
    let (data_dim, bounded) = match target {
        "pointmass" => (2usize, true),
        other => {
            let spec = target_by_id(other)?;
            (spec.dim(), spec.bounds().is_some())
        }
    };
    let grid = if bounded && data_dim == 1 {
        json!({"dims": [{"lo": -1.0, "hi": 1.0, "bins": 400}], "smoothing": 1e-10})
    } else {
        json!({"dims": [{"lo": -3.0, "hi": 3.0, "bins": 100}, {"lo": -3.0, "hi": 3.0, "bins": 100}], "smoothing": 1e-10})
    };

    let mut v = json!({
        "mode": mode.as_str(),
        "target": target,
        "seeds": [0],
        "out_dir": format!("runs/{}_{}", mode.as_str(), target),
        "objective": "identity",
        "regularizer": "none",
        "schedule": {"kind": "fix_and_decay", "total": 50000, "hold": 10000},
        "reference": "gaussian",
        "iterations": 50000,
        "batch_size": 1024,
        "learning_rate": 2e-4,
        "adam_beta1": 0.9,
        "adam_beta2": 0.999,
        "adam_epsilon": 1e-8,
        "critic_steps": 1,
        "refit_interval": 1,
        "f2_clamp": -30.0,
        "dataset_size": null,
        "noise_dim": 2,
        "generator_layers": [2, 128, 128, 2],
        "critic_layers": [2, 128, 128, 1],
        "inverse_layers": [2, 128, 128, 2],
        "q_layers": [4, 128, 128, 1],
        "eval_interval": 1000,
        "eval_samples": 20000,
        "final_samples": 20000,
        "grid": grid,
        "particles": 512,
        "svgd_steps": 2000,
        "svgd_step_size": 0.05,
        "snapshot_interval": 500,
        "env_steps": 50000,
        "m_samples": 32,
        "gamma": 0.99,
        "alpha": 1.0,
        "buffer_capacity": 1000000,
        "warmup": 128,
        "sync_interval": 1000,
        "eval_rollouts": 1,
        "samples_path": null,
    });
    let obj = v.as_object_mut().expect("defaults are an object");

    match mode {
        Mode::TrainGan => {}
        Mode::TrainRas => {
            obj.insert("regularizer".into(), json!("cycle_consistency"));
        }
        Mode::Constrained => {
            obj.insert("regularizer".into(), json!("cycle_consistency"));
            obj.insert("reference".into(), json!("beta"));
            obj.insert("iterations".into(), json!(20000));
            obj.insert("batch_size".into(), json!(512));
            obj.insert("learning_rate".into(), json!(1e-4));
            obj.insert(
                "schedule".into(),
                json!({"kind": "fix_and_decay", "total": 20000, "hold": 10000}),
            );
            obj.insert("generator_layers".into(), json!([2, 128, 128, 1]));
            obj.insert("critic_layers".into(), json!([1, 128, 128, 1]));
            obj.insert("inverse_layers".into(), json!([1, 128, 128, 2]));
        }
        Mode::Svgd => {}
        Mode::AmortizedSvgd => {
            obj.insert("iterations".into(), json!(2000));
            obj.insert("batch_size".into(), json!(512));
            obj.insert("learning_rate".into(), json!(1e-4));
            obj.insert("eval_interval".into(), json!(200));
            if bounded && data_dim == 1 {
                obj.insert("generator_layers".into(), json!([2, 128, 128, 1]));
            }
        }
        Mode::Sql => {
            obj.insert("learning_rate".into(), json!(3e-4));
            obj.insert("batch_size".into(), json!(128));
            obj.insert("generator_layers".into(), json!([4, 128, 128, 2]));
            obj.insert("critic_layers".into(), json!([4, 128, 128, 128, 1]));
            obj.insert("inverse_layers".into(), json!([2, 128, 128, 4]));
        }
        Mode::Eval => {}
    }
    Ok(v)
}

fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies one `--set a.b.c=value` override onto a JSON object.
fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!("--set {key}: {} is not an object", parts[..i].join(".")))
        })?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), parse_override_value(raw));
            return Ok(());
        }
        node = obj
            .entry((*part).to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("split never yields an empty path");
}

/// Overlays user keys on the defaults. Top-level only: nested objects the
/// user provides replace the default wholesale.
pub fn merge_defaults(user: Value, mut defaults: Value) -> Value {
    if let (Some(u), Some(d)) = (user.as_object(), defaults.as_object_mut()) {
        for (k, v) in u {
            d.insert(k.clone(), v.clone());
        }
    }
    defaults
}

fn validate_keys(user: &Map<String, Value>, mode: Mode) -> Result<()> {
    let allowed = allowed_keys(mode);
    for key in user.keys() {
        if !allowed.contains(key.as_str()) {
            return Err(Error::Config(format!(
                "key {key:?} is not applicable to mode {:?}; allowed keys: {}",
                mode.as_str(),
                allowed.into_iter().collect::<Vec<_>>().join(", ")
            )));
        }
    }
    Ok(())
}

/// Parses a config file with optional `--set` overrides and seed/out-dir
/// replacements.
pub fn parse_config(
    path: &Path,
    overrides: &[(String, String)],
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let user: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: malformed JSON: {e}", path.display())))?;
    config_from_value(user, overrides, seed, out_dir)
}

/// The same pipeline starting from an in-memory JSON object.
pub fn config_from_value(
    user: Value,
    overrides: &[(String, String)],
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
) -> Result<ExperimentConfig> {
    let user_obj = user
        .as_object()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?
        .clone();
    let mode_str = user_obj
        .get("mode")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Config("config needs a string \"mode\" field".into()))?;
    let mode = Mode::from_str(mode_str)?;
    let target = user_obj
        .get("target")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Config("config needs a string \"target\" field".into()))?
        .to_string();
    validate_keys(&user_obj, mode)?;

    let defaults = default_config_value(mode, &target)?;
    let mut merged = merge_defaults(Value::Object(user_obj), defaults);
    for (key, raw) in overrides {
        let top = key.split('.').next().unwrap_or(key);
        if !allowed_keys(mode).contains(top) {
            return Err(Error::Config(format!(
                "--set {key}: key {top:?} is not applicable to mode {:?}",
                mode.as_str()
            )));
        }
        apply_override(&mut merged, key, raw)?;
    }

    let mut cfg: ExperimentConfig = serde_json::from_value(merged)
        .map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        self.schedule.validate()?;
        GridSpec::new(self.grid.dims.clone(), self.grid.smoothing)?;
        match self.mode {
            Mode::Sql => {
                if self.target != "pointmass" {
                    return Err(Error::Config(format!(
                        "sql mode targets an environment; known environments: pointmass (got {:?})",
                        self.target
                    )));
                }
            }
            _ => {
                let spec = target_by_id(&self.target)?;
                match self.mode {
                    Mode::TrainGan => {
                        if spec.mixture.is_none() {
                            return Err(Error::Config(format!(
                                "sample-based training needs a sampleable target, and {:?} has no sampler",
                                self.target
                            )));
                        }
                        if self.regularizer == EntropyRegularizer::CrossEntropy {
                            return Err(Error::Config(
                                "the cross-entropy regularizer needs an evaluable log u; it is only available when learning from an unnormalized density".into(),
                            ));
                        }
                    }
                    Mode::TrainRas => {
                        if spec.bounds().is_some() {
                            return Err(Error::Config(
                                "use mode \"constrained\" for bounded targets".into(),
                            ));
                        }
                    }
                    Mode::Constrained => {
                        if spec.bounds().is_none() {
                            return Err(Error::Config(format!(
                                "mode \"constrained\" needs a bounded target, and {:?} is unbounded",
                                self.target
                            )));
                        }
                    }
                    Mode::Eval => {
                        if self.samples_path.is_none() {
                            return Err(Error::Config("eval mode needs a samples_path".into()));
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}
