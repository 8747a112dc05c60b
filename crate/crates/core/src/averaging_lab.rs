//! The averaged slow equation `dY = F̄(Y) dt + dL^{α₂}` and statistical
//! checks that the slow component of the coupled system converges to it.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::ergodics::{self, InvariantConfig, ESCAPE_LIMIT};
use crate::error::{invalid, Error, Result};
use crate::fractional_operator::{
    apply_generator, Drift1d, FnProfile, FracConfig, GeneratorKind, GeneratorSpec, GridProfile,
    Profile,
};
use crate::quadrature;
use crate::rng::{derive_seed, RngStream};
use crate::sde_engine::{
    par_paths, simulate_multiscale, step_count, MultiscaleSystem, PathMeta, Record, SamplePath,
};
use crate::stable_noise::{levy_constant, sample_symmetric, StableLaw};
use crate::stats::{self, Estimate};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AveragedDrift {
    /// `F ≡ 0`, so `F̄ ≡ 0` on all of `ℝᵐ`.
    Zero,
    /// `F̄` at increasing nodes `y_k`, linearly interpolated.
    Tabulated { nodes: Vec<f64>, values: Vec<Estimate> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedSystem {
    pub system: String,
    pub drift: AveragedDrift,
    pub law_slow: StableLaw,
    /// Test hook: with `false` the equation is the ODE `dY = F̄(Y) dt`.
    pub noise: bool,
}

impl AveragedSystem {
    pub fn slow_dim(&self) -> usize {
        self.law_slow.dim()
    }

    /// `F̄(y)`; never extrapolates beyond the tabulated nodes.
    pub fn fbar(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.drift {
            AveragedDrift::Zero => {
                out.iter_mut().for_each(|o| *o = 0.0);
                Ok(())
            }
            AveragedDrift::Tabulated { nodes, values } => {
                let v = y[0];
                let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
                if !(v >= lo && v <= hi) {
                    return Err(Error::Extrapolation { y: v, lo, hi });
                }
                let i = nodes.partition_point(|n| *n <= v).clamp(1, nodes.len() - 1) - 1;
                let w = (v - nodes[i]) / (nodes[i + 1] - nodes[i]);
                out[0] = (1.0 - w) * values[i].value + w * values[i + 1].value;
                Ok(())
            }
        }
    }

    /// `F̄` as a one-dimensional drift; `NaN` outside the tabulated range.
    pub fn drift_fn(&self) -> Drift1d {
        let me = self.clone();
        Arc::new(move |y: f64| {
            let mut out = [0.0];
            me.fbar(&[y], &mut out).map(|_| out[0]).unwrap_or(f64::NAN)
        })
    }

    /// `L₂ = -(-Δ)^{α₂/2} + F̄·∇`.
    pub fn generator(&self) -> Result<GeneratorSpec> {
        GeneratorSpec::new(self.law_slow, self.drift_fn(), GeneratorKind::Averaged)
    }
}

/// `F̄(y_k) = ∫ F(x, y_k) μ̂^{y_k}(dx)` at every node, with jackknife errors.
pub fn build_averaged(
    sys: &MultiscaleSystem,
    y_grid: &[f64],
    x0: &[f64],
    measure: &InvariantConfig,
    seed: u64,
) -> Result<AveragedSystem> {
    let drift = if sys.coeffs.slow_drift_vanishes() {
        AveragedDrift::Zero
    } else {
        if sys.slow_dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: sys.slow_dim(),
            });
        }
        if y_grid.len() < 2 || y_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("y_grid", "need at least two strictly increasing nodes"));
        }
        let mut values = Vec::with_capacity(y_grid.len());
        for (k, &y) in y_grid.iter().enumerate() {
            let node_seed = derive_seed(seed, &format!("averaged-drift/{k}"));
            let m = ergodics::estimate_invariant(sys, &[y], x0, measure, node_seed)?;
            values.push(ergodics::integrate(&m, |x| {
                let mut out = [0.0];
                sys.coeffs.f(x, &[y], &mut out);
                out[0]
            }));
        }
        AveragedDrift::Tabulated {
            nodes: y_grid.to_vec(),
            values,
        }
    };
    Ok(AveragedSystem {
        system: sys.name().to_string(),
        drift,
        law_slow: sys.law_slow,
        noise: sys.noise.slow,
    })
}

/// Euler–Maruyama for `dY = F̄(Y) dt + dL^{α₂}`; path `stream` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_averaged(
    avg: &AveragedSystem,
    y0: &[f64],
    t_end: f64,
    dt: f64,
    seed: u64,
    stream: u64,
    record: Record,
) -> Result<SamplePath> {
    let m = avg.slow_dim();
    if y0.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: y0.len(),
        });
    }
    let n = step_count(t_end, dt)?;
    let h = t_end / n as f64;
    let scale = h.powf(1.0 / avg.law_slow.alpha());
    let mut rng = RngStream::new(seed, stream).generator();
    let mut path = SamplePath::new(
        m,
        PathMeta {
            system: format!("{}-averaged", avg.system),
            seed,
            stream,
            escaped_at: None,
        },
    );
    let mut y = y0.to_vec();
    let mut f = vec![0.0; m];
    path.push(0.0, &y);
    for k in 1..=n {
        avg.fbar(&y, &mut f)?;
        for (yi, fi) in y.iter_mut().zip(&f) {
            *yi += fi * h;
            if avg.noise {
                *yi += scale * sample_symmetric(avg.law_slow.alpha(), &mut rng);
            }
        }
        if record.keep(k, n) {
            path.push(if k == n { t_end } else { k as f64 * h }, &y);
        }
    }
    Ok(path)
}

/// Bounded functionals of the path on `[0, t₀]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PastFunctional {
    One,
    /// `1 / (1 + e^{-Y_{t₀}})`.
    Sigmoid,
    /// `(1/t₀) ∫_0^{t₀} tanh(Y_s) ds`, or `tanh(Y_0)` when `t₀ = 0`.
    PathAverage,
}

impl PastFunctional {
    pub fn eval(&self, path: &SamplePath, t0: f64) -> f64 {
        let i0 = path.index_at(t0);
        match self {
            PastFunctional::One => 1.0,
            PastFunctional::Sigmoid => 1.0 / (1.0 + (-path.state(i0)[0]).exp()),
            PastFunctional::PathAverage => {
                if i0 == 0 {
                    return path.state(0)[0].tanh();
                }
                let vals: Vec<f64> = (0..=i0).map(|i| path.state(i)[0].tanh()).collect();
                crate::sde_engine::trapezoid(&path.times[..=i0], &vals) / path.times[i0]
            }
        }
    }
}

/// Smooth bump `exp(1 - 1/(1 - ((y - center)/width)²))`, supported on
/// `|y - center| < width`, with peak value 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
}

impl Bump {
    pub fn eval(&self, y: f64) -> f64 {
        let s = (y - self.center) / self.width;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }
}

/// A test function `φ` together with `L₂φ`.
pub trait GeneratorPair: Sync {
    fn phi(&self, y: f64) -> f64;
    fn generator(&self, y: f64) -> f64;
}

/// Constant `φ`, annihilated by every generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPair(pub f64);

impl GeneratorPair for ConstantPair {
    fn phi(&self, _y: f64) -> f64 {
        self.0
    }
    fn generator(&self, _y: f64) -> f64 {
        0.0
    }
}

/// `L₂φ` for a bump `φ`, tabulated on a spline grid around the support and
/// computed exactly from the far-field integral outside it.
pub struct GeneratorTable {
    bump: Bump,
    alpha: f64,
    table: GridProfile,
    reach: (f64, f64),
}

impl GeneratorTable {
    pub fn new(avg: &AveragedSystem, bump: Bump, margin: f64, spacing: f64) -> Result<Self> {
        let gen = avg.generator()?;
        let (a, b) = bump.support();
        let (lo, hi) = (a - margin, b + margin);
        let n = ((hi - lo) / spacing).round() as usize;
        let h = (hi - lo) / n as f64;
        let profile = FnProfile::constant_outside(move |y| bump.eval(y), a, b);
        let cfg = FracConfig::with_spacing(1e-3);
        let values = (0..=n)
            .map(|i| apply_generator(&gen, &profile, lo + i as f64 * h, &cfg).map(|q| q.value))
            .collect::<Result<Vec<f64>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("margin", "table reaches beyond the averaged-drift grid"));
        }
        Ok(Self {
            bump,
            alpha: avg.law_slow.alpha(),
            table: GridProfile::new(lo, h, values, None)?,
            reach: (lo, hi),
        })
    }

    fn eval(&self, y: f64) -> f64 {
        if y >= self.reach.0 && y <= self.reach.1 {
            return self.table.eval(y);
        }
        // Outside the support φ and φ' vanish: L₂φ(y) = c ∫ φ(w) |w - y|^{-1-α} dw.
        let (a, b) = self.bump.support();
        let c = levy_constant(1, self.alpha);
        c * quadrature::integrate(
            |w: f64| self.bump.eval(w) * (w - y).abs().powf(-1.0 - self.alpha),
            a,
            b,
            1e-12,
        )
        .value
    }
}

impl GeneratorPair for GeneratorTable {
    fn phi(&self, y: f64) -> f64 {
        self.bump.eval(y)
    }
    fn generator(&self, y: f64) -> f64 {
        self.eval(y)
    }
}

/// Monte Carlo estimate of
/// `E[(φ(Y_t) - φ(Y_{t₀}) - ∫_{t₀}^t L₂φ(Y_s) ds) Φ(Y|_{[0,t₀]})]`.
pub fn martingale_residual(
    paths: &[SamplePath],
    pair: &dyn GeneratorPair,
    t0: f64,
    t: f64,
    phi_past: PastFunctional,
) -> Result<Estimate> {
    if !(t > t0 && t0 >= 0.0) {
        return Err(invalid("t", "need 0 <= t0 < t"));
    }
    let terms: Vec<f64> = paths
        .iter()
        .filter(|p| !p.escaped())
        .map(|p| {
            let (i0, i1) = (p.index_at(t0), p.index_at(t));
            let lphi: Vec<f64> = (i0..=i1).map(|i| pair.generator(p.state(i)[0])).collect();
            let integral = crate::sde_engine::trapezoid(&p.times[i0..=i1], &lphi);
            let jump = pair.phi(p.state(i1)[0]) - pair.phi(p.state(i0)[0]);
            (jump - integral) * phi_past.eval(p, t0)
        })
        .collect();
    if terms.len() < 2 {
        return Err(invalid("paths", "need at least two usable paths"));
    }
    Ok(Estimate::from_samples(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakConvergenceConfig {
    pub t_end: f64,
    pub n_paths: usize,
    /// Step of the averaged equation.
    pub averaged_dt: f64,
    /// Spacing of recorded times (for the martingale residual).
    pub record_interval: f64,
    pub bootstrap: usize,
    pub permutations: usize,
    pub level: f64,
    pub bump: Bump,
    pub t0: f64,
}

impl Default for WeakConvergenceConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            n_paths: 20_000,
            averaged_dt: 1e-3,
            record_interval: 0.01,
            bootstrap: 200,
            permutations: 200,
            level: 0.01,
            bump: Bump {
                center: 0.0,
                width: 2.0,
            },
            t0: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderRung {
    pub eps: f64,
    pub ks: f64,
    pub ks_band: f64,
    pub wasserstein: f64,
    pub wasserstein_band: f64,
    pub escaped_fraction: f64,
    pub mart_residual: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakConvergenceReport {
    pub eps_ladder: Vec<f64>,
    pub rungs: Vec<LadderRung>,
    pub wasserstein_order: f64,
    pub ks_critical: f64,
    pub wasserstein_critical: f64,
    pub ks_trend_ok: bool,
    pub ks_null_ok: bool,
    pub wasserstein_trend_ok: bool,
    pub wasserstein_null_ok: bool,
    pub verdict: bool,
}

/// `p = 1` when `α₂ > 1.1`, else `α₂/2`.
pub fn wasserstein_order(alpha_slow: f64) -> f64 {
    if alpha_slow > 1.1 {
        1.0
    } else {
        alpha_slow / 2.0
    }
}

fn resample<R: Rng>(xs: &[f64], rng: &mut R) -> Vec<f64> {
    (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).collect()
}

/// Bootstrap standard deviation of a two-sample statistic.
fn bootstrap_sd<F: Fn(&[f64], &[f64]) -> f64>(a: &[f64], b: &[f64], reps: usize, seed: u64, stat: F) -> f64 {
    let mut rng = RngStream::new(seed, 0).generator();
    let vals: Vec<f64> = (0..reps)
        .map(|_| stat(&stats::sorted(&resample(a, &mut rng)), &stats::sorted(&resample(b, &mut rng))))
        .collect();
    Estimate::from_samples(&vals).stderr * (reps as f64).sqrt()
}

/// Upper `level` quantile of the statistic under random relabeling of the
/// pooled sample.
fn permutation_critical<F: Fn(&[f64], &[f64]) -> f64>(
    a: &[f64],
    b: &[f64],
    reps: usize,
    level: f64,
    seed: u64,
    stat: F,
) -> f64 {
    let mut rng = RngStream::new(seed, 1).generator();
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut vals: Vec<f64> = (0..reps)
        .map(|_| {
            for i in (1..pooled.len()).rev() {
                let j = rng.random_range(0..=i);
                pooled.swap(i, j);
            }
            let (x, y) = pooled.split_at(a.len());
            stat(&stats::sorted(x), &stats::sorted(y))
        })
        .collect();
    vals.sort_by(f64::total_cmp);
    stats::quantile_sorted(&vals, 1.0 - level)
}

/// Ensemble of slow paths `Y^ε` on `[0, T]`, recorded every
/// `record_interval`, with `x0` as the fast start.
pub fn slow_ensemble(
    sys: &MultiscaleSystem,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    record_interval: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SamplePath>> {
    let dt = sys.max_multiscale_dt();
    let steps = step_count(t_end, dt)?;
    let h = t_end / steps as f64;
    let stride = ((record_interval / h).round() as usize).max(1);
    par_paths(n_paths, |i| {
        simulate_multiscale(sys, x0, y0, t_end, h, seed, i, Record::Every(stride)).map(|p| p.1)
    })
}

/// Ensemble of averaged paths, recorded every `record_interval`.
pub fn averaged_ensemble(
    avg: &AveragedSystem,
    y0: &[f64],
    t_end: f64,
    dt: f64,
    record_interval: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SamplePath>> {
    let steps = step_count(t_end, dt)?;
    let h = t_end / steps as f64;
    let stride = ((record_interval / h).round() as usize).max(1);
    par_paths(n_paths, |i| simulate_averaged(avg, y0, t_end, h, seed, i, Record::Every(stride)))
}

fn terminal_component(paths: &[SamplePath]) -> Vec<f64> {
    paths.iter().filter(|p| !p.escaped()).map(|p| p.terminal()[0]).collect()
}

/// Compares `law(Y^ε_T)` with `law(Y_T)` along a decreasing ε ladder.
///
/// Verdict: the KS (and Wasserstein) distance at the smallest ε is below
/// the two-sample null critical value, and no step down the ladder raises
/// the distance by more than two combined bootstrap standard deviations.
pub fn weak_convergence_test(
    sys: &MultiscaleSystem,
    avg: &AveragedSystem,
    x0: &[f64],
    y0: &[f64],
    eps_ladder: &[f64],
    cfg: &WeakConvergenceConfig,
    seed: u64,
) -> Result<WeakConvergenceReport> {
    if eps_ladder.is_empty() || eps_ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("eps_ladder", "must be nonempty and strictly decreasing"));
    }
    if avg.slow_dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: avg.slow_dim(),
        });
    }
    let p = wasserstein_order(avg.law_slow.alpha());
    let reference = averaged_ensemble(
        avg,
        y0,
        cfg.t_end,
        cfg.averaged_dt,
        cfg.record_interval,
        cfg.n_paths,
        derive_seed(seed, "averaged"),
    )?;
    let ref_sorted = stats::sorted(&terminal_component(&reference));
    let table = GeneratorTable::new(avg, cfg.bump, 8.0, 0.02)?;

    let mut rungs = Vec::with_capacity(eps_ladder.len());
    for &eps in eps_ladder {
        let tag = format!("eps={eps}");
        let sys_eps = sys.clone().with_eps(eps)?;
        let paths = slow_ensemble(
            &sys_eps,
            x0,
            y0,
            cfg.t_end,
            cfg.record_interval,
            cfg.n_paths,
            derive_seed(seed, &tag),
        )?;
        let escaped = paths.iter().filter(|p| p.escaped()).count();
        let escaped_fraction = escaped as f64 / paths.len() as f64;
        if escaped_fraction > ESCAPE_LIMIT {
            return Err(Error::Escaped {
                fraction: escaped_fraction,
                limit: ESCAPE_LIMIT,
            });
        }
        let sample = stats::sorted(&terminal_component(&paths));
        let ks = stats::ks_two_sample_sorted(&sample, &ref_sorted);
        let w = stats::wasserstein_sorted(&sample, &ref_sorted, p);
        let bseed = derive_seed(seed, &format!("bootstrap/{tag}"));
        let ks_band = bootstrap_sd(&sample, &ref_sorted, cfg.bootstrap, bseed, stats::ks_two_sample_sorted);
        let wasserstein_band = bootstrap_sd(&sample, &ref_sorted, cfg.bootstrap, bseed, |a, b| {
            stats::wasserstein_sorted(a, b, p)
        });
        let mart_residual = martingale_residual(
            &paths,
            &table,
            cfg.t0,
            cfg.t_end,
            PastFunctional::One,
        )?;
        rungs.push(LadderRung {
            eps,
            ks,
            ks_band,
            wasserstein: w,
            wasserstein_band,
            escaped_fraction,
            mart_residual,
        });
    }

    let last = rungs.last().expect("nonempty ladder");
    let n_last = last_sample_len(&rungs, cfg.n_paths);
    let ks_critical = stats::ks_two_sample_critical(cfg.level, n_last, ref_sorted.len());
    let ref_terminal = terminal_component(&reference);
    // Null for W: a fresh averaged ensemble against the reference.
    let wasserstein_critical = {
        let fresh = averaged_ensemble(
            avg,
            y0,
            cfg.t_end,
            cfg.averaged_dt,
            cfg.t_end,
            cfg.n_paths,
            derive_seed(seed, "averaged-null"),
        )?;
        permutation_critical(
            &terminal_component(&fresh),
            &ref_terminal,
            cfg.permutations,
            cfg.level,
            derive_seed(seed, "permutation"),
            |a, b| stats::wasserstein_sorted(a, b, p),
        )
    };
    let trend = |d: fn(&LadderRung) -> (f64, f64)| {
        rungs.windows(2).all(|w| {
            let (a, sa) = d(&w[0]);
            let (b, sb) = d(&w[1]);
            b - a <= 2.0 * sa.hypot(sb)
        })
    };
    let ks_trend_ok = trend(|r| (r.ks, r.ks_band));
    let wasserstein_trend_ok = trend(|r| (r.wasserstein, r.wasserstein_band));
    let ks_null_ok = last.ks < ks_critical;
    let wasserstein_null_ok = last.wasserstein < wasserstein_critical;
    Ok(WeakConvergenceReport {
        eps_ladder: eps_ladder.to_vec(),
        verdict: ks_trend_ok && ks_null_ok,
        rungs,
        wasserstein_order: p,
        ks_critical,
        wasserstein_critical,
        ks_trend_ok,
        ks_null_ok,
        wasserstein_trend_ok,
        wasserstein_null_ok,
    })
}

fn last_sample_len(rungs: &[LadderRung], n_paths: usize) -> usize {
    let f = rungs.last().map(|r| r.escaped_fraction).unwrap_or(0.0);
    ((1.0 - f) * n_paths as f64).round() as usize
}

/// `E[min(x², M)]` under a one-dimensional stable law, by quadrature of the
/// density on `[-√M, √M]` plus `M` times the outer mass.
pub fn truncated_square_mean(law: &crate::stable_noise::SymmetricStable, level: f64) -> Result<Estimate> {
    let r = level.sqrt();
    let mut err = 0.0;
    let inner = quadrature::integrate_panels(
        |x: f64| {
            let d = law.density(x).map(|q| q.value).unwrap_or(f64::NAN);
            x * x * d
        },
        &quadrature::panel_breaks(-r, r, 0.25),
        1e-9,
    );
    err += inner.error;
    let outer = 2.0 * (1.0 - law.cdf(r)?.value);
    Ok(Estimate::new(inner.value + level * outer, err))
}
