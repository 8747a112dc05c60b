//! Invariant measures of the frozen fast equation and their mixing behavior.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::sde_engine::{
    par_paths, step_count, FrozenStepper, MultiscaleSystem, Record, SamplePath, ESCAPE_MAGNITUDE,
};
use crate::stable_noise::SymmetricStable;
use crate::stats::{self, Estimate};

/// Blocks used by the jackknife in [`integrate`]; contiguous so serial
/// correlation along a trajectory stays inside a block.
pub const JACKKNIFE_BLOCKS: usize = 100;

/// Largest tolerated fraction of escaped samples or paths.
pub const ESCAPE_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub system: String,
    pub y: Vec<f64>,
    pub burn_in: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Weighted point cloud in `ℝⁿ`. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    dim: usize,
    samples: Vec<f64>,
    weights: Vec<f64>,
    pub provenance: Provenance,
}

impl EmpiricalMeasure {
    /// Equally weighted measure on row-major `samples`.
    pub fn uniform(dim: usize, samples: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if dim == 0 || samples.is_empty() || samples.len() % dim != 0 {
            return Err(invalid("samples", "length must be a positive multiple of dim"));
        }
        let n = samples.len() / dim;
        Ok(Self {
            dim,
            samples,
            weights: vec![1.0 / n as f64; n],
            provenance,
        })
    }

    pub fn weighted(
        dim: usize,
        samples: Vec<f64>,
        weights: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if dim == 0 || samples.len() != dim * weights.len() || weights.is_empty() {
            return Err(invalid("weights", "one weight per sample required"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("weights", "must be nonnegative"));
        }
        let total = stats::pairwise_sum(&weights);
        if !(total > 0.0) {
            return Err(invalid("weights", "total mass must be positive"));
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(Self {
            dim,
            samples,
            weights,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)[k]).collect()
    }

    /// CSV with one column per coordinate and a trailing weight column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        writeln!(w, "{},weight", header.join(","))?;
        for i in 0..self.len() {
            for v in self.point(i) {
                write!(w, "{v:e},")?;
            }
            writeln!(w, "{:e}", self.weights[i])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantConfig {
    pub burn_in: f64,
    pub n_samples: usize,
    pub thinning: f64,
    pub dt: f64,
    /// Independent chains run in parallel, each contributing a contiguous
    /// block of `n_samples / chains` samples.
    pub chains: usize,
}

impl InvariantConfig {
    /// Burn-in `5/γ`, thinning `1/γ`, step `0.01/γ`, one chain.
    pub fn for_system(sys: &MultiscaleSystem, n_samples: usize) -> Self {
        Self {
            burn_in: 5.0 / sys.gamma,
            n_samples,
            thinning: 1.0 / sys.gamma,
            dt: sys.frozen_dt(),
            chains: 1,
        }
    }

    pub fn with_chains(mut self, chains: usize) -> Self {
        self.chains = chains;
        self
    }
}

/// Samples `X_{burn_in + k·thinning}`, `k = 1..n`, of the frozen equation
/// at slow value `y`, read off long trajectories started at `x0`.
pub fn estimate_invariant(
    sys: &MultiscaleSystem,
    y: &[f64],
    x0: &[f64],
    cfg: &InvariantConfig,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    sys.check_dims(x0, y)?;
    if cfg.n_samples == 0 {
        return Err(invalid("n_samples", "must be positive"));
    }
    if !(cfg.burn_in >= 0.0) {
        return Err(invalid("burn_in", "must be nonnegative"));
    }
    let chains = cfg.chains.clamp(1, cfg.n_samples);
    let burn_steps = if cfg.burn_in > 0.0 {
        step_count(cfg.burn_in, cfg.dt)?
    } else {
        0
    };
    let thin_steps = step_count(cfg.thinning, cfg.dt)?;
    let h = cfg.thinning / thin_steps as f64;
    let hb = if burn_steps > 0 {
        cfg.burn_in / burn_steps as f64
    } else {
        h
    };
    let n = x0.len();

    let blocks = par_paths(chains, |c| {
        let lo = c as usize * cfg.n_samples / chains;
        let hi = (c as usize + 1) * cfg.n_samples / chains;
        let mut rng = RngStream::new(seed, c).generator();
        let mut x = x0.to_vec();
        let mut noise = vec![0.0; n];
        let mut burn = FrozenStepper::new(sys, y, hb)?;
        for k in 1..=burn_steps {
            burn.draw(&mut rng, &mut noise);
            burn.advance(&mut x, &noise);
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    step: k,
                    time: k as f64 * hb,
                });
            }
        }
        let mut stepper = FrozenStepper::new(sys, y, h)?;
        let mut out = Vec::with_capacity((hi - lo) * n);
        let mut escaped = 0usize;
        for _ in lo..hi {
            for _ in 0..thin_steps {
                stepper.draw(&mut rng, &mut noise);
                stepper.advance(&mut x, &noise);
            }
            if !x.iter().all(|v| v.is_finite() && v.abs() < ESCAPE_MAGNITUDE) {
                escaped += 1;
                x.copy_from_slice(x0);
            }
            out.extend_from_slice(&x);
        }
        Ok((out, escaped))
    })?;

    let escaped: usize = blocks.iter().map(|b| b.1).sum();
    let fraction = escaped as f64 / cfg.n_samples as f64;
    if fraction > ESCAPE_LIMIT {
        return Err(Error::Escaped {
            fraction,
            limit: ESCAPE_LIMIT,
        });
    }
    let samples: Vec<f64> = blocks.into_iter().flat_map(|b| b.0).collect();
    EmpiricalMeasure::uniform(
        n,
        samples,
        Provenance {
            system: sys.name().to_string(),
            y: y.to_vec(),
            burn_in: cfg.burn_in,
            n_samples: cfg.n_samples,
            seed,
        },
    )
}

/// `∫ f dμ` with a block-jackknife standard error.
pub fn integrate<F: Fn(&[f64]) -> f64>(measure: &EmpiricalMeasure, f: F) -> Estimate {
    let vals: Vec<f64> = (0..measure.len()).map(|i| f(measure.point(i))).collect();
    let (value, stderr) = stats::weighted_mean_jackknife(&vals, measure.weights(), JACKKNIFE_BLOCKS);
    Estimate::new(value, stderr)
}

/// Moves every sample of `measure` forward by time `t` under the frozen
/// equation, each with its own noise stream.
pub fn push_forward(
    measure: &EmpiricalMeasure,
    sys: &MultiscaleSystem,
    y: &[f64],
    t: f64,
    dt: f64,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    let n = measure.dim();
    let moved = par_paths(measure.len(), |i| {
        let p = crate::sde_engine::simulate_frozen(
            sys,
            y,
            measure.point(i as usize),
            t,
            dt,
            seed,
            i,
            Record::Terminal,
        )?;
        Ok(p.terminal().to_vec())
    })?;
    EmpiricalMeasure::weighted(
        n,
        moved.into_iter().flatten().collect(),
        measure.weights().to_vec(),
        Provenance {
            burn_in: measure.provenance.burn_in + t,
            seed,
            ..measure.provenance.clone()
        },
    )
}

/// Stationary law of `dX = -X dt + dL^α` in one dimension: the symmetric
/// stable law with cf `exp(-|ξ|^α / α)`.
pub fn density_oracle(alpha: f64) -> Result<SymmetricStable> {
    SymmetricStable::new(alpha, 1.0 / alpha)
}

/// A named scalar test function on the fast space.
pub struct TestFn<'a> {
    pub name: String,
    pub f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub t: f64,
    /// `|E φ(X_t) - μ(φ)|`.
    pub signal: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub rate: f64,
    pub rate_stderr: f64,
    pub prefactor: f64,
    pub test_fn: String,
    pub r2: f64,
    pub window: (f64, f64),
    pub profile: Vec<DecayPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingConfig {
    pub horizon: f64,
    pub points: usize,
    pub n_paths: usize,
    pub dt: f64,
    /// Required per-point signal-to-noise ratio inside the fit window.
    pub snr: f64,
}

impl MixingConfig {
    pub fn new(sys: &MultiscaleSystem, horizon: f64, n_paths: usize) -> Self {
        Self {
            horizon,
            points: 40,
            n_paths,
            dt: sys.frozen_dt(),
            snr: 3.0,
        }
    }
}

/// `E φ(X_t)` on `points + 1` equally spaced times in `[0, horizon]`, with
/// one independent path per sample.
pub fn decay_profile(
    sys: &MultiscaleSystem,
    y: &[f64],
    phi: &TestFn<'_>,
    x0: &[f64],
    cfg: &MixingConfig,
    seed: u64,
) -> Result<Vec<(f64, Estimate)>> {
    let steps = step_count(cfg.horizon, cfg.dt)?;
    let points = cfg.points.clamp(1, steps);
    let stride = steps / points;
    let steps = stride * points;
    let dt = cfg.horizon / steps as f64;
    let paths: Vec<SamplePath> = par_paths(cfg.n_paths, |i| {
        crate::sde_engine::simulate_frozen(sys, y, x0, cfg.horizon, dt, seed, i, Record::Every(stride))
    })?;
    let escaped = paths.iter().filter(|p| p.escaped()).count();
    let fraction = escaped as f64 / cfg.n_paths.max(1) as f64;
    if fraction > ESCAPE_LIMIT {
        return Err(Error::Escaped {
            fraction,
            limit: ESCAPE_LIMIT,
        });
    }
    let live: Vec<&SamplePath> = paths.iter().filter(|p| !p.escaped()).collect();
    let times = live
        .first()
        .map(|p| p.times.clone())
        .ok_or_else(|| invalid("n_paths", "no usable paths"))?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let vals: Vec<f64> = live.iter().map(|p| (phi.f)(p.state(j))).collect();
            (t, Estimate::from_samples(&vals))
        })
        .collect())
}

/// Fits `|E φ(X_t) - μ(φ)| ≈ C e^{-ρt}` on the longest run of times, after the
/// signal peak, where the signal exceeds `snr` times its noise.
pub fn mixing_rate(
    sys: &MultiscaleSystem,
    y: &[f64],
    phi: &TestFn<'_>,
    x0: &[f64],
    reference: Estimate,
    cfg: &MixingConfig,
    seed: u64,
) -> Result<MixingReport> {
    let raw = decay_profile(sys, y, phi, x0, cfg, seed)?;
    let profile: Vec<DecayPoint> = raw
        .iter()
        .map(|(t, e)| DecayPoint {
            t: *t,
            signal: (e.value - reference.value).abs(),
            noise: e.stderr.hypot(reference.stderr),
        })
        .collect();
    fit_decay(profile, &phi.name, cfg.snr)
}

/// Log-linear fit of a decay profile; see [`mixing_rate`].
pub fn fit_decay(profile: Vec<DecayPoint>, test_fn: &str, snr: f64) -> Result<MixingReport> {
    let resolved = |p: &DecayPoint| p.signal > snr * p.noise && p.signal > 0.0;
    let peak = profile
        .iter()
        .enumerate()
        .filter(|(_, p)| resolved(p))
        .max_by(|a, b| a.1.signal.total_cmp(&b.1.signal))
        .map(|(i, _)| i)
        .ok_or_else(|| {
            Error::SignalBelowNoise(format!("`{test_fn}`: no time point with signal/noise > {snr}"))
        })?;
    let (mut best, mut start) = ((peak, peak), None);
    for (i, p) in profile.iter().enumerate().skip(peak) {
        match (resolved(p), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s > best.1 + 1 - best.0 {
                    best = (s, i - 1);
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if profile.len() - s > best.1 + 1 - best.0 {
            best = (s, profile.len() - 1);
        }
    }
    let window = &profile[best.0..=best.1];
    if window.len() < 3 {
        return Err(Error::SignalBelowNoise(format!(
            "`{test_fn}`: only {} resolved points after the peak",
            window.len()
        )));
    }
    let ts: Vec<f64> = window.iter().map(|p| p.t).collect();
    let ls: Vec<f64> = window.iter().map(|p| p.signal.ln()).collect();
    let fit = stats::fit_line(&ts, &ls);
    if !(fit.slope < 0.0) {
        return Err(Error::SignalBelowNoise(format!(
            "`{test_fn}`: fitted profile does not decay (slope {:.3e})",
            fit.slope
        )));
    }
    Ok(MixingReport {
        rate: -fit.slope,
        rate_stderr: fit.slope_stderr,
        prefactor: fit.intercept.exp(),
        test_fn: test_fn.to_string(),
        r2: fit.r2,
        window: (ts[0], ts[ts.len() - 1]),
        profile,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenteringReport {
    pub y: Vec<f64>,
    /// `∫ G_j dμ^y` per component.
    pub components: Vec<Estimate>,
    pub passed: bool,
}

/// Checks `|∫ G_j(·, y) dμ^y| <= k·SE` for every component of `G`.
pub fn centering_check(
    sys: &MultiscaleSystem,
    measure: &EmpiricalMeasure,
    k: f64,
) -> CenteringReport {
    let y = measure.provenance.y.clone();
    let m = sys.slow_dim();
    let components: Vec<Estimate> = (0..m)
        .map(|j| {
            integrate(measure, |x| {
                let mut g = vec![0.0; m];
                sys.coeffs.g(x, &y, &mut g);
                g[j]
            })
        })
        .collect();
    let passed = components.iter().all(|e| e.within(0.0, k));
    CenteringReport {
        y,
        components,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_engine::builtin::toy;

    fn prov() -> Provenance {
        Provenance {
            system: "t".into(),
            y: vec![0.0],
            burn_in: 0.0,
            n_samples: 3,
            seed: 0,
        }
    }

    #[test]
    fn weights_normalized() {
        let m = EmpiricalMeasure::weighted(1, vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 2.0], prov()).unwrap();
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((integrate(&m, |x| x[0]).value - 2.25).abs() < 1e-12);
        assert!(EmpiricalMeasure::weighted(1, vec![1.0], vec![-1.0], prov()).is_err());
    }

    #[test]
    fn constant_integrates_to_one() {
        let sys = toy();
        let cfg = InvariantConfig::for_system(&sys, 2000);
        let m = estimate_invariant(&sys, &[0.0], &[0.0], &cfg, 4).unwrap();
        assert_eq!(m.len(), 2000);
        let e = integrate(&m, |_| 1.0);
        assert!((e.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_spot_value() {
        let rho = density_oracle(1.5).unwrap();
        let exact = 1.5f64.powf(2.0 / 3.0) * (2.0 / 3.0) * statrs::function::gamma::gamma(2.0 / 3.0)
            / std::f64::consts::PI;
        let got = rho.density(0.0).unwrap();
        assert!((got.value - exact).abs() < 1e-8);
        assert!((got.value - 0.3765).abs() < 1e-4);
        assert!(got.error <= 1e-8);
    }

    #[test]
    fn csv_export() {
        let m = EmpiricalMeasure::uniform(2, vec![1.0, 2.0, 3.0, 4.0], prov()).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x0,x1,weight\n"));
        assert_eq!(s.lines().count(), 3);
    }

    #[test]
    fn fit_recovers_synthetic_rate() {
        let profile: Vec<DecayPoint> = (0..30)
            .map(|i| {
                let t = 0.2 * i as f64;
                DecayPoint {
                    t,
                    signal: 2.0 * (-0.7 * t).exp(),
                    noise: if t < 4.0 { 1e-3 } else { 1.0 },
                }
            })
            .collect();
        let r = fit_decay(profile, "synthetic", 3.0).unwrap();
        assert!((r.rate - 0.7).abs() < 1e-10);
        assert!((r.prefactor - 2.0).abs() < 1e-9);
        assert!(r.window.1 < 4.0);
    }

    #[test]
    fn flat_noise_is_reported() {
        let profile: Vec<DecayPoint> = (0..10)
            .map(|i| DecayPoint {
                t: i as f64,
                signal: 1e-3,
                noise: 1e-2,
            })
            .collect();
        assert!(matches!(
            fit_decay(profile, "flat", 3.0),
            Err(Error::SignalBelowNoise(_))
        ));
    }
}
