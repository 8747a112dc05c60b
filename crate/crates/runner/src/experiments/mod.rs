//! Built-in experiments.
//!
//! Each experiment reads its system and budgets from the config, derives all
//! of its randomness from `derive_seed(config.seed, name)`, and returns a
//! [`Report`] whose rows are the CSV payload.

mod averaging;
mod corrector;
mod flows;
mod noise;

use anyhow::bail;
use stable_averaging::ergodics::{
    estimate_invariant, integrate, mixing_rate, InvariantConfig, MixingConfig, MixingReport, TestFn,
};
use stable_averaging::poisson_corrector::Truncation;
use stable_averaging::rng::derive_seed;
use stable_averaging::sde_engine::MultiscaleSystem;

use crate::config::ExperimentConfig;
use crate::report::Report;

pub struct Experiment {
    pub name: &'static str,
    /// Registry key used when the config names no system.
    pub default_system: &'static str,
    /// Acceptance criteria the experiment decides.
    pub criteria: &'static [u32],
    pub about: &'static str,
    run: fn(&Ctx) -> anyhow::Result<Report>,
}

pub const EXPERIMENTS: &[Experiment] = &[
    Experiment {
        name: "stable-cf",
        default_system: "toy",
        criteria: &[1],
        about: "stable sampler against the characteristic function exp(-|xi|^alpha)",
        run: noise::stable_cf,
    },
    Experiment {
        name: "invariant-ks",
        default_system: "toy",
        criteria: &[2],
        about: "frozen-equation samples against the stationary stable-OU density",
        run: noise::invariant_ks,
    },
    Experiment {
        name: "contraction",
        default_system: "toy",
        criteria: &[3],
        about: "synchronously coupled frozen paths contract like exp(-gamma t)",
        run: flows::contraction,
    },
    Experiment {
        name: "variational",
        default_system: "toy",
        criteria: &[4],
        about: "first variational flow: exact for b = -x, finite differences for a nonlinear b",
        run: flows::variational,
    },
    Experiment {
        name: "moments",
        default_system: "toy",
        criteria: &[5],
        about: "sup-moment scaling in the horizon and in eps",
        run: flows::moments,
    },
    Experiment {
        name: "mixing",
        default_system: "toy",
        criteria: &[6],
        about: "exponential decay of E sin(X_t) towards its stationary mean",
        run: noise::mixing,
    },
    Experiment {
        name: "poisson-oracle",
        default_system: "toy",
        criteria: &[7],
        about: "Monte Carlo Poisson solution for f = sin against its quadrature formula",
        run: corrector::poisson_oracle,
    },
    Experiment {
        name: "corrector-residual",
        default_system: "toy",
        criteria: &[8],
        about: "generator residual L1 G~ + G of the corrector along a refinement ladder",
        run: corrector::residual,
    },
    Experiment {
        name: "corrector-bounds",
        default_system: "toy",
        criteria: &[9],
        about: "growth bounds of the corrector and its x-gradient",
        run: corrector::bounds,
    },
    Experiment {
        name: "centering",
        default_system: "toy",
        criteria: &[10],
        about: "G and the corrector u integrate to zero against the frozen invariant measure",
        run: corrector::centering,
    },
    Experiment {
        name: "averaged-drift",
        default_system: "toy",
        criteria: &[11],
        about: "averaged slow drift: identically zero for the toy, zero within error for F = x",
        run: averaging::averaged_drift,
    },
    Experiment {
        name: "weak-convergence",
        default_system: "toy",
        criteria: &[12],
        about: "law of the slow component at T against the averaged limit along an eps ladder",
        run: averaging::weak_convergence,
    },
    Experiment {
        name: "martingale-residual",
        default_system: "toy",
        criteria: &[13],
        about: "martingale-problem residual for the averaged process and for the slow component",
        run: averaging::martingale,
    },
    Experiment {
        name: "custom",
        default_system: "toy",
        criteria: &[],
        about: "centering, averaged drift and weak convergence for any configured system",
        run: averaging::custom,
    },
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

/// Runs the configured experiment on the current rayon pool.
pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    let Some(exp) = find(&cfg.experiment) else {
        bail!("unknown experiment `{}`", cfg.experiment);
    };
    let ctx = Ctx {
        cfg,
        exp,
        seed: derive_seed(cfg.seed, exp.name),
    };
    (exp.run)(&ctx)
}

pub(crate) struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub exp: &'static Experiment,
    pub seed: u64,
}

impl Ctx<'_> {
    pub fn seed_for(&self, tag: &str) -> u64 {
        derive_seed(self.seed, tag)
    }

    pub fn system(&self) -> anyhow::Result<MultiscaleSystem> {
        Ok(self.cfg.system.build(self.exp.default_system)?)
    }

    /// The configured system, which must be one of `names`.
    pub fn system_among(&self, names: &[&str]) -> anyhow::Result<MultiscaleSystem> {
        let sys = self.system()?;
        if !names.contains(&sys.name()) {
            bail!(
                "experiment `{}` needs one of the systems {names:?}, got `{}`",
                self.exp.name,
                sys.name()
            );
        }
        Ok(sys)
    }

    /// Another registry entry with the configured overrides.
    pub fn named(&self, name: &str) -> anyhow::Result<MultiscaleSystem> {
        Ok(self.cfg.system.build_named(name)?)
    }

    pub fn report(&self) -> Report {
        Report::new(self.exp.name)
    }

    pub fn n_paths(&self, default: usize) -> usize {
        self.cfg.budgets.n_paths.unwrap_or(default)
    }

    pub fn n_samples(&self, default: usize) -> usize {
        self.cfg.budgets.n_samples.unwrap_or(default)
    }

    pub fn dt(&self, default: f64) -> f64 {
        self.cfg.budgets.dt.unwrap_or(default)
    }

    pub fn t_end(&self, default: f64) -> f64 {
        self.cfg.budgets.t_end.unwrap_or(default)
    }

    pub fn grid_step(&self, default: f64) -> f64 {
        self.cfg.budgets.grid_step.unwrap_or(default)
    }
}

pub(crate) fn sin0(x: &[f64]) -> f64 {
    x[0].sin()
}

/// Start of the mixing fits that calibrate the Poisson truncation.
pub(crate) const X_REF: f64 = 3.0;

/// Tolerance on the neglected time tail of the Poisson integrals.
pub(crate) const TAIL_TOL: f64 = 1e-3;

/// Fits the decay of `E sin(X_t)` from `X_REF` at slow value `y` and turns it
/// into a truncation horizon for right-hand sides bounded by `rhs_sup`.
pub(crate) fn calibrate_truncation(
    sys: &MultiscaleSystem,
    y: &[f64],
    rhs_sup: f64,
    n_paths: usize,
    seed: u64,
) -> anyhow::Result<(MixingReport, Truncation)> {
    let measure = estimate_invariant(
        sys,
        y,
        &[0.0],
        &InvariantConfig::for_system(sys, 20_000).with_chains(4),
        derive_seed(seed, "reference"),
    )?;
    let reference = integrate(&measure, sin0);
    let phi = TestFn {
        name: "sin".into(),
        f: &sin0,
    };
    let cfg = MixingConfig::new(sys, 8.0 / sys.gamma, n_paths);
    let mix = mixing_rate(sys, y, &phi, &[X_REF], reference, &cfg, derive_seed(seed, "mixing"))?;
    let trunc = Truncation::from_mixing(Some(&mix), 1.0, X_REF, rhs_sup, TAIL_TOL)?;
    Ok((mix, trunc))
}

/// `max_k |G_k(x, y)|` scanned over `|x| <= 20`, the sup-norm the
/// truncation tail bounds use.
pub(crate) fn g_sup(sys: &MultiscaleSystem, y: &[f64]) -> f64 {
    let mut g = vec![0.0; sys.slow_dim()];
    (0..=4000)
        .map(|i| {
            sys.coeffs.g(&[-20.0 + 0.01 * i as f64], y, &mut g);
            g.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        })
        .fold(0.0, f64::max)
}
