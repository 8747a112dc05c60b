use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stable_averaging_cli::config::{self, ExperimentConfig, Overrides};
use stable_averaging_cli::experiments::EXPERIMENTS;
use stable_averaging_cli::report::status;
use stable_averaging_cli::{run, RunOptions};

/// Experiments for fast-slow SDEs driven by stable noise.
#[derive(Parser)]
#[command(name = "stavg", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write manifest, CSV and summary.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Run even if the system violates a hypothesis.
        #[arg(long)]
        force: bool,
    },
    /// List the built-in experiments.
    ListExperiments,
    /// Resolve and validate a configuration without running it.
    ValidateConfig {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file, or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    /// Named parameter set (`toy`).
    #[arg(long)]
    preset: Option<String>,
    /// Registry key of the system.
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    r0: Option<f64>,
    /// Stability index of the fast noise.
    #[arg(long)]
    alpha: Option<f64>,
    /// Stability index of the slow noise.
    #[arg(long)]
    alpha_slow: Option<f64>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
}

impl ConfigArgs {
    fn resolve(self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => config::load(p)?,
            None => ExperimentConfig::default(),
        };
        Overrides {
            experiment: self.experiment,
            preset: self.preset,
            system: self.system,
            seed: self.seed,
            out: self.out,
            eps: self.eps,
            r0: self.r0,
            alpha: self.alpha,
            alpha_slow: self.alpha_slow,
            n_paths: self.n_paths,
            n_samples: self.n_samples,
            dt: self.dt,
            t_end: self.t_end,
        }
        .apply(&mut cfg)?;
        Ok(cfg)
    }
}

const EXIT_FAIL: u8 = 1;
const EXIT_INFRA: u8 = 2;

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INFRA)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Cmd::ListExperiments => {
            for e in EXPERIMENTS {
                let crit: Vec<String> = e.criteria.iter().map(|c| c.to_string()).collect();
                println!("{:<20} [{}] {}", e.name, crit.join(","), e.about);
            }
            Ok(0)
        }
        Cmd::ValidateConfig { config } => {
            let cfg = config.resolve()?;
            let warnings = config::validate(&cfg)?;
            for w in &warnings {
                println!("warning: {w}");
            }
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(if warnings.iter().any(|w| w.blocking) {
                EXIT_INFRA
            } else {
                0
            })
        }
        Cmd::Run {
            config,
            workers,
            force,
        } => {
            let cfg = config.resolve()?;
            let out = run(&cfg, &RunOptions { workers, force })?;
            for v in &out.report.verdicts {
                println!("criterion {:>2} {}: {}", v.criterion, v.title, status(v.pass));
            }
            println!("results in {}", cfg.output_dir.display());
            Ok(if out.report.passed() { 0 } else { EXIT_FAIL })
        }
    }
}
