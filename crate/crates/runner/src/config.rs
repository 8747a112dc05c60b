//! Experiment configuration.
//!
//! A config is one JSON object:
//!
//! ```json
//! {
//!   "experiment": "weak-convergence",
//!   "system": { "name": "toy", "eps": 0.1, "r0": 0.25, "alpha_fast": 1.5, "alpha_slow": 1.5 },
//!   "budgets": { "n_paths": 20000, "n_samples": 100000, "dt": 0.001, "t_end": 1.0, "grid_step": 0.25 },
//!   "seed": 20240601,
//!   "output_dir": "results"
//! }
//! ```
//!
//! Every field is optional. Unset system fields take the registry defaults
//! and unset budgets take each experiment's defaults. A manifest written by
//! a previous run is also accepted; its `config` member is used.
//!
//! Precedence is command-line flags, then the file, then defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use stable_averaging::sde_engine::builtin::{lookup, SystemOverrides};
use stable_averaging::sde_engine::{HypothesisWarning, MultiscaleSystem};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub system: SystemSpec,
    pub budgets: Budgets,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            system: SystemSpec::default(),
            budgets: Budgets::default(),
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("results"),
        }
    }
}

/// Registry key plus parameter overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    pub name: Option<String>,
    pub eps: Option<f64>,
    pub r0: Option<f64>,
    pub alpha_fast: Option<f64>,
    pub alpha_slow: Option<f64>,
}

impl SystemSpec {
    pub fn overrides(&self) -> SystemOverrides {
        SystemOverrides {
            eps: self.eps,
            r0: self.r0,
            alpha_fast: self.alpha_fast,
            alpha_slow: self.alpha_slow,
        }
    }

    /// Builds the named system, or `fallback` when no name is set.
    pub fn build(&self, fallback: &str) -> stable_averaging::Result<MultiscaleSystem> {
        lookup(self.name.as_deref().unwrap_or(fallback), &self.overrides())
    }

    /// Builds another registry entry with the same overrides.
    pub fn build_named(&self, name: &str) -> stable_averaging::Result<MultiscaleSystem> {
        lookup(name, &self.overrides())
    }
}

/// Scale knobs. Each experiment documents which ones it reads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub n_paths: Option<usize>,
    pub n_samples: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub grid_step: Option<f64>,
}

impl Budgets {
    fn check(&self) -> anyhow::Result<()> {
        if self.n_paths == Some(0) || self.n_samples == Some(0) {
            bail!("budgets: n_paths and n_samples must be positive");
        }
        for (name, v) in [("dt", self.dt), ("t_end", self.t_end), ("grid_step", self.grid_step)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    bail!("budgets: {name} = {v} must be positive and finite");
                }
            }
        }
        Ok(())
    }
}

/// Reads a config file, or the `config` member of a manifest.
pub fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse(text: &str) -> anyhow::Result<ExperimentConfig> {
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("git_describe").is_some() {
        value = value
            .get_mut("config")
            .map(serde_json::Value::take)
            .context("manifest has no config member")?;
    }
    Ok(serde_json::from_value(value)?)
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub preset: Option<String>,
    pub system: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub eps: Option<f64>,
    pub r0: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_slow: Option<f64>,
    pub n_paths: Option<usize>,
    pub n_samples: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

pub const PRESETS: &[&str] = &["toy"];

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> anyhow::Result<()> {
        if let Some(p) = &self.preset {
            match p.as_str() {
                "toy" => cfg.system.name = Some("toy".into()),
                other => bail!("unknown preset `{other}` (available: {})", PRESETS.join(", ")),
            }
        }
        if let Some(v) = &self.experiment {
            cfg.experiment = v.clone();
        }
        if let Some(v) = &self.system {
            cfg.system.name = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        let sys = &mut cfg.system;
        sys.eps = self.eps.or(sys.eps);
        sys.r0 = self.r0.or(sys.r0);
        sys.alpha_fast = self.alpha.or(sys.alpha_fast);
        sys.alpha_slow = self.alpha_slow.or(sys.alpha_slow);
        let b = &mut cfg.budgets;
        b.n_paths = self.n_paths.or(b.n_paths);
        b.n_samples = self.n_samples.or(b.n_samples);
        b.dt = self.dt.or(b.dt);
        b.t_end = self.t_end.or(b.t_end);
        Ok(())
    }
}

/// Checks that the config names a known experiment, that its system builds,
/// and returns the hypothesis warnings for that system.
pub fn validate(cfg: &ExperimentConfig) -> anyhow::Result<Vec<HypothesisWarning>> {
    let Some(exp) = crate::experiments::find(&cfg.experiment) else {
        bail!(
            "unknown experiment `{}` (see `stavg list-experiments`)",
            cfg.experiment
        );
    };
    cfg.budgets.check()?;
    let sys = cfg.system.build(exp.default_system)?;
    Ok(sys.validate())
}
