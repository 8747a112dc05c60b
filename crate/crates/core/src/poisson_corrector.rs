//! Monte Carlo solution of the frozen Poisson equation `L₁ u = -f` through
//! `u(x) = ∫_0^∞ E f(X^x_t) dt`, and the corrector `G̃` built from it.

use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::ergodics::{self, EmpiricalMeasure, MixingReport, ESCAPE_LIMIT};
use crate::error::{invalid, Error, Result};
use crate::fractional_operator::{apply_generator, FracConfig, GeneratorSpec, GridProfile};
use crate::rng::RngStream;
use crate::sde_engine::{par_paths, step_count, FrozenStepper, MultiscaleSystem, ESCAPE_MAGNITUDE};
use crate::stats::Estimate;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `L₁ u = -f` at a frozen slow value, with a centered right-hand side.
#[derive(Clone)]
pub struct PoissonProblem {
    pub sys: MultiscaleSystem,
    pub y: Vec<f64>,
    pub rhs: ScalarFn,
    pub centering_tolerance: f64,
    /// `∫ f dμ̂` measured when the problem was built.
    pub centering: Estimate,
}

impl std::fmt::Debug for PoissonProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonProblem")
            .field("system", &self.sys.name())
            .field("y", &self.y)
            .field("centering", &self.centering)
            .finish_non_exhaustive()
    }
}

impl PoissonProblem {
    /// Fails with [`Error::NotCentered`] unless `|∫ f dμ̂| <= tolerance`.
    pub fn new(
        sys: &MultiscaleSystem,
        y: &[f64],
        rhs: ScalarFn,
        measure: &EmpiricalMeasure,
        centering_tolerance: f64,
    ) -> Result<Self> {
        if y.len() != sys.slow_dim() {
            return Err(Error::Dimension {
                expected: sys.slow_dim(),
                got: y.len(),
            });
        }
        let centering = ergodics::integrate(measure, |x| rhs(x));
        if !(centering.value.abs() <= centering_tolerance) {
            return Err(Error::NotCentered {
                mean: centering.value.abs(),
                tolerance: centering_tolerance,
            });
        }
        Ok(Self {
            sys: sys.clone(),
            y: y.to_vec(),
            rhs,
            centering_tolerance,
            centering,
        })
    }
}

/// Where the time integral is cut and what the cut costs.
///
/// The neglected part `∫_T^∞ |E f(X^x_t)| dt` is bounded by
/// `C ‖f‖₀ e^{-ρT}/ρ · (1 + |x|^{1/2}) / (1 + |x_ref|^{1/2})`, with `ρ` and
/// `C` read off a mixing fit started at `x_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truncation {
    pub horizon: f64,
    pub rate: f64,
    /// Decay prefactor per unit sup-norm of the test function.
    pub constant: f64,
    pub x_ref: f64,
}

impl Truncation {
    /// Horizon `T = ln(C ‖f‖₀ / tol) / ρ` from a fitted mixing report.
    pub fn from_mixing(
        report: Option<&MixingReport>,
        test_fn_sup: f64,
        x_ref: f64,
        rhs_sup: f64,
        tol: f64,
    ) -> Result<Self> {
        let r = report.ok_or_else(|| {
            Error::TailNotResolved("no mixing fit available to bound the time tail".into())
        })?;
        if !(r.rate > 0.0 && r.prefactor.is_finite() && test_fn_sup > 0.0) {
            return Err(Error::TailNotResolved(format!(
                "mixing fit unusable (rate {}, prefactor {})",
                r.rate, r.prefactor
            )));
        }
        if !(tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        let constant = r.prefactor / test_fn_sup;
        let horizon = ((constant * rhs_sup / tol).ln() / r.rate).max(1.0 / r.rate);
        Ok(Self {
            horizon,
            rate: r.rate,
            constant,
            x_ref,
        })
    }

    pub fn with_horizon(self, horizon: f64) -> Self {
        Self { horizon, ..self }
    }

    pub fn tail_bound(&self, x: f64, rhs_sup: f64) -> f64 {
        let shape = (1.0 + x.abs().sqrt()) / (1.0 + self.x_ref.abs().sqrt());
        self.constant * rhs_sup * (-self.rate * self.horizon).exp() / self.rate * shape
    }
}

/// Time between evaluations of the right-hand side in the trapezoid rule.
/// The Euler step stays `dt`; `E f(X_t)` is smooth in `t`, so sampling it
/// coarser than the step costs only `O(Δ²)`.
pub const RHS_SAMPLE_INTERVAL: f64 = 0.01;

/// Per-path trapezoidal integrals `∫_0^T g(X^{x_k}_t) dt` for every start
/// `x_k`, all driven by the same noise on a given path. Laid out
/// `[path][start][component]`; escaped paths are dropped.
#[allow(clippy::too_many_arguments)]
fn crn_integrals(
    sys: &MultiscaleSystem,
    y: &[f64],
    starts: &[f64],
    g: &(dyn Fn(&[f64], &mut [f64]) + Sync),
    outputs: usize,
    t_end: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if sys.fast_dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: sys.fast_dim(),
        });
    }
    if n_paths < 2 {
        return Err(invalid("n_paths", "need at least two paths for an error bar"));
    }
    let stride = (RHS_SAMPLE_INTERVAL / dt).round().max(1.0) as usize;
    let samples = step_count(t_end, dt * stride as f64)?;
    let steps = samples * stride;
    let h = t_end / steps as f64;
    let hs = h * stride as f64;
    let k = starts.len();
    let per_path = par_paths(n_paths, |p| {
        let mut stepper = FrozenStepper::new(sys, y, h)?;
        let mut rng = RngStream::new(seed, p).generator();
        let mut xs = starts.to_vec();
        let mut noise = [0.0];
        let mut buf = vec![0.0; outputs];
        let mut acc = vec![0.0; k * outputs];
        let mut add = |xs: &[f64], w: f64, acc: &mut [f64]| {
            for (j, x) in xs.iter().enumerate() {
                g(std::slice::from_ref(x), &mut buf);
                for (a, v) in acc[j * outputs..(j + 1) * outputs].iter_mut().zip(&buf) {
                    *a += w * v;
                }
            }
        };
        add(&xs, 0.5 * hs, &mut acc);
        for step in 1..=steps {
            stepper.draw(&mut rng, &mut noise);
            for x in xs.iter_mut() {
                stepper.advance(std::slice::from_mut(x), &noise);
            }
            if xs.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    step,
                    time: step as f64 * h,
                });
            }
            if xs.iter().any(|x| x.abs() > ESCAPE_MAGNITUDE) {
                return Ok(None);
            }
            if step % stride == 0 {
                add(&xs, if step == steps { 0.5 * hs } else { hs }, &mut acc);
            }
        }
        Ok(Some(acc))
    })?;
    let escaped = per_path.iter().filter(|p| p.is_none()).count();
    let fraction = escaped as f64 / n_paths as f64;
    if fraction > ESCAPE_LIMIT {
        return Err(Error::Escaped {
            fraction,
            limit: ESCAPE_LIMIT,
        });
    }
    Ok(per_path.into_iter().flatten().collect())
}

/// Mean over paths of column `c` of the per-path table.
fn column(samples: &[Vec<f64>], c: usize) -> Estimate {
    let v: Vec<f64> = samples.iter().map(|s| s[c]).collect();
    Estimate::from_samples(&v)
}

/// `u(x) = ∫_0^T E f(X^x_t) dt`. The reported standard error is the Monte
/// Carlo error plus the truncation tail bound.
pub fn poisson_solve(
    prob: &PoissonProblem,
    x: f64,
    trunc: &Truncation,
    rhs_sup: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<Estimate> {
    let rhs = prob.rhs.clone();
    let g = move |x: &[f64], out: &mut [f64]| out[0] = rhs(x);
    let s = crn_integrals(&prob.sys, &prob.y, &[x], &g, 1, trunc.horizon, dt, n_paths, seed)?;
    let e = column(&s, 0);
    Ok(Estimate::new(e.value, e.stderr + trunc.tail_bound(x, rhs_sup)))
}

/// The quadrature oracle for `b = -x`, `f = sin`:
/// `u(x) = ∫_0^∞ sin(x e^{-s}) exp(-(1 - e^{-αs})/α) ds`.
pub fn ou_sine_oracle(alpha: f64, x: f64) -> f64 {
    // Substituting v = e^{-s}: u = ∫_0^1 sin(xv) exp(-(1 - v^α)/α) dv / v.
    crate::quadrature::integrate(
        |v: f64| {
            if v == 0.0 {
                x * (-1.0 / alpha).exp()
            } else {
                (x * v).sin() * (-(1.0 - v.powf(alpha)) / alpha).exp() / v
            }
        },
        0.0,
        1.0,
        1e-12,
    )
    .value
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrectorConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub x_step: f64,
    pub n_paths: usize,
    pub dt: f64,
    /// Step in `y` for the finite-difference `∇_y`, `∇²_y`; `None` skips them.
    pub y_step: Option<f64>,
}

impl Default for CorrectorConfig {
    fn default() -> Self {
        Self {
            x_lo: -5.0,
            x_hi: 5.0,
            x_step: 0.25,
            n_paths: 10_000,
            dt: 1e-3,
            y_step: None,
        }
    }
}

impl CorrectorConfig {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.x_hi - self.x_lo) / self.x_step).round() as usize;
        (0..=n).map(|i| self.x_lo + i as f64 * self.x_step).collect()
    }
}

/// `G̃(x, y)` and `u(x, y) = ⟨∇f₁(y), G̃(x, y)⟩` on a uniform fast grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectorField {
    pub system: String,
    pub y: Vec<f64>,
    pub f1_grad: Vec<f64>,
    pub xs: Vec<f64>,
    /// `G̃_j(x_k)`, indexed `[k][j]`; standard errors include the tail bound.
    pub gtilde: Vec<Vec<Estimate>>,
    pub values: Vec<Estimate>,
    pub grad_x: Option<Vec<Estimate>>,
    pub grad_y: Option<Vec<Vec<Estimate>>>,
    pub hess_y: Option<Vec<Vec<Estimate>>>,
    pub truncation: Truncation,
    pub paths_per_point: usize,
    /// Per-path `u` on the grid, `[path][k]`, for error bars on functionals.
    #[serde(skip)]
    pub u_paths: Vec<Vec<f64>>,
}

/// Runs the CRN solver for `G(·, y)` on the grid; `[path][k·m + j]`.
fn gtilde_samples(
    sys: &MultiscaleSystem,
    y: &[f64],
    xs: &[f64],
    trunc: &Truncation,
    cfg: &CorrectorConfig,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let m = sys.slow_dim();
    let yv = y.to_vec();
    let coeffs = sys.coeffs.clone();
    let g = move |x: &[f64], out: &mut [f64]| coeffs.g(x, &yv, out);
    crn_integrals(sys, y, xs, &g, m, trunc.horizon, cfg.dt, cfg.n_paths, seed)
}

/// Builds `G̃` and `u` on the configured grid. `G` must be centered in `x`
/// at `y`; the truncation tail bound uses `sup|G_j|` = `g_sup`.
pub fn build_corrector(
    sys: &MultiscaleSystem,
    y: &[f64],
    f1_grad: &[f64],
    trunc: &Truncation,
    g_sup: f64,
    cfg: &CorrectorConfig,
    seed: u64,
) -> Result<CorrectorField> {
    let m = sys.slow_dim();
    if f1_grad.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: f1_grad.len(),
        });
    }
    if !(cfg.x_step > 0.0 && cfg.x_hi > cfg.x_lo) {
        return Err(invalid("grid", "need x_lo < x_hi and a positive step"));
    }
    let xs = cfg.grid();
    let k = xs.len();
    let samples = gtilde_samples(sys, y, &xs, trunc, cfg, seed)?;

    let gtilde: Vec<Vec<Estimate>> = (0..k)
        .map(|i| {
            let tail = trunc.tail_bound(xs[i], g_sup);
            (0..m)
                .map(|j| {
                    let e = column(&samples, i * m + j);
                    Estimate::new(e.value, e.stderr + tail)
                })
                .collect()
        })
        .collect();
    let u_paths: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            (0..k)
                .map(|i| (0..m).map(|j| f1_grad[j] * s[i * m + j]).sum())
                .collect()
        })
        .collect();
    let f1_norm: f64 = f1_grad.iter().map(|v| v.abs()).sum();
    let values: Vec<Estimate> = (0..k)
        .map(|i| {
            let e = column(&u_paths, i);
            Estimate::new(e.value, e.stderr + f1_norm * trunc.tail_bound(xs[i], g_sup))
        })
        .collect();

    // One-sided differences at the edges, central inside.
    let grad_x: Vec<Estimate> = (0..k)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(k - 1));
            let w = xs[b] - xs[a];
            let d: Vec<f64> = u_paths.iter().map(|u| (u[b] - u[a]) / w).collect();
            Estimate::from_samples(&d)
        })
        .collect();

    let (grad_y, hess_y) = match cfg.y_step {
        None => (None, None),
        Some(dy) => {
            let (gy, hy) = y_derivatives(sys, y, &xs, &samples, trunc, cfg, dy, seed)?;
            (Some(gy), Some(hy))
        }
    };

    Ok(CorrectorField {
        system: sys.name().to_string(),
        y: y.to_vec(),
        f1_grad: f1_grad.to_vec(),
        xs,
        gtilde,
        values,
        grad_x: Some(grad_x),
        grad_y,
        hess_y,
        truncation: *trunc,
        paths_per_point: u_paths.len(),
        u_paths,
    })
}

/// `∂_{y_l} G̃_j` and `∂²_{y_l} G̃_j` by common-random-number central
/// differences; indexed `[k][j·m + l]`.
#[allow(clippy::too_many_arguments)]
fn y_derivatives(
    sys: &MultiscaleSystem,
    y: &[f64],
    xs: &[f64],
    center: &[Vec<f64>],
    trunc: &Truncation,
    cfg: &CorrectorConfig,
    dy: f64,
    seed: u64,
) -> Result<(Vec<Vec<Estimate>>, Vec<Vec<Estimate>>)> {
    let m = sys.slow_dim();
    let k = xs.len();
    if center.len() != cfg.n_paths {
        return Err(Error::Escaped {
            fraction: 1.0 - center.len() as f64 / cfg.n_paths as f64,
            limit: 0.0,
        });
    }
    let mut grad = vec![vec![Estimate::default(); m * m]; k];
    let mut hess = vec![vec![Estimate::default(); m * m]; k];
    for l in 0..m {
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[l] += dy;
        ym[l] -= dy;
        let plus = gtilde_samples(sys, &yp, xs, trunc, cfg, seed)?;
        let minus = gtilde_samples(sys, &ym, xs, trunc, cfg, seed)?;
        if plus.len() != center.len() || minus.len() != center.len() {
            return Err(invalid("y_step", "escapes differ between shifted runs"));
        }
        for i in 0..k {
            for j in 0..m {
                let c = i * m + j;
                let d1: Vec<f64> = plus
                    .iter()
                    .zip(&minus)
                    .map(|(p, q)| (p[c] - q[c]) / (2.0 * dy))
                    .collect();
                let d2: Vec<f64> = plus
                    .iter()
                    .zip(&minus)
                    .zip(center)
                    .map(|((p, q), o)| (p[c] - 2.0 * o[c] + q[c]) / (dy * dy))
                    .collect();
                grad[i][j * m + l] = Estimate::from_samples(&d1);
                hess[i][j * m + l] = Estimate::from_samples(&d2);
            }
        }
    }
    Ok((grad, hess))
}

impl CorrectorField {
    pub fn spacing(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    /// Piecewise-linear `u` for path `p`, constant beyond the grid.
    fn interp(&self, u: &[f64], x: f64) -> f64 {
        let (lo, h) = (self.xs[0], self.spacing());
        let s = ((x - lo) / h).clamp(0.0, (self.xs.len() - 1) as f64);
        let i = (s.floor() as usize).min(self.xs.len() - 2);
        let w = s - i as f64;
        (1.0 - w) * u[i] + w * u[i + 1]
    }

    /// `∫ u dμ̂` with an error bar combining the Monte Carlo spread of `u`
    /// across paths and the jackknife error of `μ̂`.
    pub fn integrate_against(&self, measure: &EmpiricalMeasure) -> Estimate {
        let per_path: Vec<f64> = self
            .u_paths
            .iter()
            .map(|u| ergodics::integrate(measure, |x| self.interp(u, x[0])).value)
            .collect();
        let mc = Estimate::from_samples(&per_path);
        let mean_u: Vec<f64> = self.values.iter().map(|e| e.value).collect();
        let sampling = ergodics::integrate(measure, |x| self.interp(&mean_u, x[0]));
        Estimate::new(sampling.value, mc.stderr.hypot(sampling.stderr))
    }

    /// Component `j` of `G̃` as a spline profile, constant beyond the grid.
    pub fn gtilde_profile(&self, j: usize) -> Result<GridProfile> {
        let vals = self.gtilde.iter().map(|g| g[j].value).collect();
        GridProfile::with_constant_tails(self.xs[0], self.spacing(), vals)
    }

    /// CSV with columns `x,y,value,stderr,grad_x,grad_x_stderr`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y,value,stderr,grad_x,grad_x_stderr")?;
        let y = self.y.first().copied().unwrap_or(0.0);
        for (i, x) in self.xs.iter().enumerate() {
            let v = self.values[i];
            let g = self
                .grad_x
                .as_ref()
                .map(|g| g[i])
                .unwrap_or(Estimate::new(f64::NAN, f64::NAN));
            writeln!(w, "{x:e},{y:e},{:e},{:e},{:e},{:e}", v.value, v.stderr, g.value, g.stderr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub x: f64,
    pub residual: f64,
    pub quadrature_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub points: Vec<ResidualPoint>,
}

/// `max_x |L₁ G̃_j(x) + G_j(x, y)|` over `points` and components, with `G̃`
/// interpolated by a spline on the field's grid.
pub fn residual_check(
    field: &CorrectorField,
    sys: &MultiscaleSystem,
    points: &[f64],
) -> Result<ResidualReport> {
    let gen = GeneratorSpec::frozen_fast(sys, &field.y)?;
    let m = sys.slow_dim();
    // Derivatives of the spline on a finer scale than its knots.
    let cfg = FracConfig {
        spacing: field.spacing() / 8.0,
        tol: 1e-8,
        ..FracConfig::default()
    };
    let mut out = Vec::with_capacity(points.len() * m);
    let mut g = vec![0.0; m];
    for j in 0..m {
        let profile = field.gtilde_profile(j)?;
        for &x in points {
            let l = apply_generator(&gen, &profile, x, &cfg)?;
            sys.coeffs.g(&[x], &field.y, &mut g);
            out.push(ResidualPoint {
                x,
                residual: l.value + g[j],
                quadrature_error: l.error,
            });
        }
    }
    let max_residual = out.iter().map(|p| p.residual.abs()).fold(0.0, f64::max);
    Ok(ResidualReport {
        max_residual,
        points: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundFit {
    /// Smallest `C` with `|v(x)| <= C·shape(x)` on the grid interior.
    pub constant: f64,
    /// Edge points exceeding the interior bound by more than three error bars.
    pub outliers: usize,
}

impl BoundFit {
    pub fn passed(&self) -> bool {
        self.constant.is_finite() && self.outliers == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// `|G̃| <= C (1 + |x|^{1/2})`.
    pub value: BoundFit,
    /// `|∇ₓ G̃| <= C`; absent without derivative estimates.
    pub grad_x: Option<BoundFit>,
    /// `|u| <= C (1 + |x|)`.
    pub growth: BoundFit,
    pub passed: bool,
}

// Points this close to the grid edge feel the truncated neighborhood and
// are checked against the interior fit instead of entering it.
const EDGE_POINTS: usize = 2;

fn fit_bound(xs: &[f64], est: &[Estimate], shape: impl Fn(f64) -> f64) -> BoundFit {
    let k = xs.len();
    let edge = if k > 2 * EDGE_POINTS + 1 { EDGE_POINTS } else { 0 };
    let ratio = |i: usize| est[i].value.abs() / shape(xs[i]);
    let constant = (edge..k - edge).map(ratio).fold(0.0, f64::max);
    let outliers = (0..edge)
        .chain(k - edge..k)
        .filter(|&i| est[i].value.abs() - 3.0 * est[i].stderr > constant * shape(xs[i]))
        .count();
    BoundFit { constant, outliers }
}

/// Fits the constants of the corrector growth bounds on the field's grid.
pub fn bound_check(field: &CorrectorField) -> BoundReport {
    let xs = &field.xs;
    let sup_gtilde: Vec<Estimate> = field
        .gtilde
        .iter()
        .map(|g| {
            g.iter()
                .copied()
                .max_by(|a, b| a.value.abs().total_cmp(&b.value.abs()))
                .unwrap_or_default()
        })
        .collect();
    let value = fit_bound(xs, &sup_gtilde, |x| 1.0 + x.abs().sqrt());
    let grad_x = field.grad_x.as_ref().map(|g| fit_bound(xs, g, |_| 1.0));
    let growth = fit_bound(xs, &field.values, |x| 1.0 + x.abs());
    let passed = value.passed() && growth.passed() && grad_x.is_some_and(|g| g.passed());
    BoundReport {
        value,
        grad_x,
        growth,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_limits() {
        assert_eq!(ou_sine_oracle(1.5, 0.0), 0.0);
        assert!((ou_sine_oracle(1.5, 1.0) + ou_sine_oracle(1.5, -1.0)).abs() < 1e-14);
        // Small x: u ≈ x ∫ e^{-s} e^{-(1-e^{-αs})/α} ds.
        let lin = crate::quadrature::integrate(
            |s: f64| (-s).exp() * (-(1.0 - (-1.5 * s).exp()) / 1.5).exp(),
            0.0,
            60.0,
            1e-13,
        )
        .value;
        assert!((ou_sine_oracle(1.5, 1e-4) / 1e-4 - lin).abs() < 1e-6);
    }

    fn synthetic(vals: &[f64]) -> CorrectorField {
        let xs: Vec<f64> = (0..vals.len()).map(|i| -2.0 + i as f64 * 0.5).collect();
        let est: Vec<Estimate> = vals.iter().map(|v| Estimate::new(*v, 0.01)).collect();
        CorrectorField {
            system: "t".into(),
            y: vec![0.0],
            f1_grad: vec![1.0],
            xs,
            gtilde: est.iter().map(|e| vec![*e]).collect(),
            values: est.clone(),
            grad_x: Some(est.iter().map(|_| Estimate::new(0.0, 0.0)).collect()),
            grad_y: None,
            hess_y: None,
            truncation: Truncation {
                horizon: 1.0,
                rate: 1.0,
                constant: 1.0,
                x_ref: 0.0,
            },
            paths_per_point: 1,
            u_paths: vec![vals.to_vec()],
        }
    }

    #[test]
    fn zero_field_passes_with_zero_constant() {
        let r = bound_check(&synthetic(&[0.0; 9]));
        assert!(r.passed);
        assert_eq!(r.value.constant, 0.0);
    }

    #[test]
    fn edge_blowup_is_an_outlier() {
        let r = bound_check(&synthetic(&[50.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]));
        assert!(!r.passed);
        assert_eq!(r.value.outliers, 1);
    }

    #[test]
    fn truncation_requires_a_fit() {
        assert!(matches!(
            Truncation::from_mixing(None, 1.0, 0.0, 1.0, 1e-3),
            Err(Error::TailNotResolved(_))
        ));
    }
}
