//! Batch runner for the stable-averaging experiments.
//!
//! A run resolves one [`config::ExperimentConfig`], validates the system
//! against the structural hypotheses, executes the experiment on a worker
//! pool of the requested size and writes three files to the output
//! directory: `manifest.json`, `<experiment>.csv` and `summary.json`.

pub mod config;
pub mod experiments;
pub mod report;

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use anyhow::{bail, Context};
use stable_averaging::rng::derive_seed;
use stable_averaging::sde_engine::HypothesisWarning;

use config::ExperimentConfig;
use report::Report;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every available core.
    pub workers: Option<usize>,
    /// Run even when validation reports a violated hypothesis.
    pub force: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub warnings: Vec<HypothesisWarning>,
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub summary: PathBuf,
}

/// Validates, runs and writes results. Blocking hypothesis violations are
/// an error unless `force` is set.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> anyhow::Result<RunOutcome> {
    let warnings = config::validate(cfg)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if !opts.force && warnings.iter().any(|w| w.blocking) {
        bail!("configuration violates a hypothesis; rerun with --force to proceed anyway");
    }
    let report = execute(cfg, opts.workers)?;

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let manifest = dir.join("manifest.json");
    let csv = dir.join(format!("{}.csv", cfg.experiment));
    let summary = dir.join("summary.json");

    let m = serde_json::json!({
        "tool": "stavg",
        "version": env!("CARGO_PKG_VERSION"),
        "git_describe": git_describe(),
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "experiment_seed": derive_seed(cfg.seed, &cfg.experiment),
        "workers": opts.workers,
        "warnings": warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        "config": cfg,
    });
    fs::write(&manifest, serde_json::to_string_pretty(&m)? + "\n")?;
    let file = fs::File::create(&csv).with_context(|| format!("creating {}", csv.display()))?;
    report.write_csv(file)?;
    fs::write(&summary, serde_json::to_string_pretty(&report.summary())? + "\n")?;

    Ok(RunOutcome {
        report,
        warnings,
        csv,
        manifest,
        summary,
    })
}

/// Runs the experiment on a dedicated pool without touching the disk.
pub fn execute(cfg: &ExperimentConfig, workers: Option<usize>) -> anyhow::Result<Report> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    pool.build()?.install(|| experiments::run(cfg))
}

fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}
