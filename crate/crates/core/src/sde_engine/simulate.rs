//! Euler–Maruyama integration of the coupled system and of the frozen fast
//! equation. Lévy increments enter additively at step boundaries.

use rand::Rng;
use rayon::prelude::*;

use super::path::{PathMeta, Record, SamplePath};
use super::system::MultiscaleSystem;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::stable_noise::sample_symmetric;
use crate::stats;

/// States larger than this mark a path as escaped instead of aborting a batch.
pub const ESCAPE_MAGNITUDE: f64 = 1e12;

/// Number of uniform steps covering `[0, t]` with steps no longer than `dt`.
pub fn step_count(t: f64, dt: f64) -> Result<usize> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("T", format!("{t} must be positive")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("{dt} must be positive")));
    }
    Ok(((t / dt) - 1e-9).ceil().max(1.0) as usize)
}

fn escaped(v: &[f64]) -> bool {
    v.iter().any(|s| s.abs() > ESCAPE_MAGNITUDE)
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|s| s.is_finite())
}

/// One Euler–Maruyama step of the coupled system, reusable across steps:
///
/// ```text
/// x' = x + ε^{-2} b(x, y) dt + ε^{-2/α₁} ΔL¹
/// y' = y + [F(x, y) + ε^{-r₀} G(x, y)] dt + ΔL²
/// ```
pub struct MultiscaleStepper<'a> {
    sys: &'a MultiscaleSystem,
    dt: f64,
    fast_drift: f64,
    fast_noise: f64,
    slow_noise: f64,
    homog: f64,
    b: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl<'a> MultiscaleStepper<'a> {
    pub fn new(sys: &'a MultiscaleSystem, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("{dt} must be positive")));
        }
        let (a1, a2) = (sys.law_fast.alpha(), sys.law_slow.alpha());
        Ok(Self {
            sys,
            dt,
            fast_drift: dt / (sys.eps * sys.eps),
            fast_noise: sys.eps.powf(-2.0 / a1) * dt.powf(1.0 / a1),
            slow_noise: dt.powf(1.0 / a2),
            homog: sys.eps.powf(-sys.r0),
            b: vec![0.0; sys.fast_dim()],
            f: vec![0.0; sys.slow_dim()],
            g: vec![0.0; sys.slow_dim()],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `(x, y)` in place. Returns `false` if the new state is not finite.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        x: &mut [f64],
        y: &mut [f64],
        rng_fast: &mut R,
        rng_slow: &mut R,
    ) -> bool {
        let c = self.sys.coeffs.as_ref();
        c.b(x, y, &mut self.b);
        c.f(x, y, &mut self.f);
        c.g(x, y, &mut self.g);
        let (a1, a2) = (self.sys.law_fast.alpha(), self.sys.law_slow.alpha());
        for (xi, bi) in x.iter_mut().zip(&self.b) {
            *xi += self.fast_drift * bi;
            if self.sys.noise.fast {
                *xi += self.fast_noise * sample_symmetric(a1, rng_fast);
            }
        }
        for ((yi, fi), gi) in y.iter_mut().zip(&self.f).zip(&self.g) {
            *yi += (fi + self.homog * gi) * self.dt;
            if self.sys.noise.slow {
                *yi += self.slow_noise * sample_symmetric(a2, rng_slow);
            }
        }
        finite(x) && finite(y)
    }
}

/// Single step returning the new state.
pub fn step_multiscale<R: Rng + ?Sized>(
    sys: &MultiscaleSystem,
    state: (&[f64], &[f64]),
    dt: f64,
    rng_fast: &mut R,
    rng_slow: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    sys.check_dims(state.0, state.1)?;
    let (mut x, mut y) = (state.0.to_vec(), state.1.to_vec());
    let mut stepper = MultiscaleStepper::new(sys, dt)?;
    if !stepper.step(&mut x, &mut y, rng_fast, rng_slow) {
        return Err(Error::NonFinite { step: 1, time: dt });
    }
    Ok((x, y))
}

/// Full trajectory of path `path` of the coupled system on a uniform grid.
#[allow(clippy::too_many_arguments)]
pub fn simulate_multiscale(
    sys: &MultiscaleSystem,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    dt: f64,
    seed: u64,
    path: u64,
    record: Record,
) -> Result<(SamplePath, SamplePath)> {
    sys.check_dims(x0, y0)?;
    let cap = sys.max_multiscale_dt();
    if dt > cap * (1.0 + 1e-9) {
        return Err(invalid(
            "dt",
            format!("{dt} exceeds the fast-scale limit eps^2 * 0.01/gamma = {cap}"),
        ));
    }
    let n = step_count(t_end, dt)?;
    let h = t_end / n as f64;
    let mut stepper = MultiscaleStepper::new(sys, h)?;
    let fast_stream = RngStream::fast(seed, path);
    let slow_stream = RngStream::slow(seed, path);
    let (mut rf, mut rs) = (fast_stream.generator(), slow_stream.generator());
    let meta = |stream| PathMeta {
        system: sys.name().to_string(),
        seed,
        stream,
        escaped_at: None,
    };
    let mut px = SamplePath::new(x0.len(), meta(fast_stream.stream_id));
    let mut py = SamplePath::new(y0.len(), meta(slow_stream.stream_id));
    let (mut x, mut y) = (x0.to_vec(), y0.to_vec());
    px.push(0.0, &x);
    py.push(0.0, &y);
    for k in 1..=n {
        if !stepper.step(&mut x, &mut y, &mut rf, &mut rs) {
            return Err(Error::NonFinite {
                step: k,
                time: k as f64 * h,
            });
        }
        if escaped(&x) || escaped(&y) {
            px.meta.escaped_at = Some(k);
            py.meta.escaped_at = Some(k);
            px.push(t_end, &x);
            py.push(t_end, &y);
            break;
        }
        if record.keep(k, n) {
            let t = if k == n { t_end } else { k as f64 * h };
            px.push(t, &x);
            py.push(t, &y);
        }
    }
    Ok((px, py))
}

/// Euler step of the frozen equation `dX = b(X, y) dt + dL^{α₁}`.
///
/// Noise draws and drift updates are separate so one increment can drive
/// several states (synchronous coupling, common random numbers).
pub struct FrozenStepper<'a> {
    sys: &'a MultiscaleSystem,
    y: Vec<f64>,
    dt: f64,
    noise_scale: f64,
    b: Vec<f64>,
}

impl<'a> FrozenStepper<'a> {
    pub fn new(sys: &'a MultiscaleSystem, y: &[f64], dt: f64) -> Result<Self> {
        if y.len() != sys.slow_dim() {
            return Err(Error::Dimension {
                expected: sys.slow_dim(),
                got: y.len(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("{dt} must be positive")));
        }
        Ok(Self {
            sys,
            y: y.to_vec(),
            dt,
            noise_scale: dt.powf(1.0 / sys.law_fast.alpha()),
            b: vec![0.0; sys.fast_dim()],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn frozen_y(&self) -> &[f64] {
        &self.y
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let a = self.sys.law_fast.alpha();
        for o in out.iter_mut() {
            *o = if self.sys.noise.fast {
                self.noise_scale * sample_symmetric(a, rng)
            } else {
                0.0
            };
        }
    }

    pub fn advance(&mut self, x: &mut [f64], noise: &[f64]) {
        self.sys.coeffs.b(x, &self.y, &mut self.b);
        for ((xi, bi), ni) in x.iter_mut().zip(&self.b).zip(noise) {
            *xi += bi * self.dt + ni;
        }
    }
}

/// Trajectory of the frozen equation at fixed slow value `y`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_frozen(
    sys: &MultiscaleSystem,
    y: &[f64],
    x0: &[f64],
    t_end: f64,
    dt: f64,
    seed: u64,
    stream: u64,
    record: Record,
) -> Result<SamplePath> {
    sys.check_dims(x0, y)?;
    let n = step_count(t_end, dt)?;
    let h = t_end / n as f64;
    let mut stepper = FrozenStepper::new(sys, y, h)?;
    let mut rng = RngStream::new(seed, stream).generator();
    let mut path = SamplePath::new(
        x0.len(),
        PathMeta {
            system: sys.name().to_string(),
            seed,
            stream,
            escaped_at: None,
        },
    );
    let mut x = x0.to_vec();
    let mut noise = vec![0.0; x0.len()];
    path.push(0.0, &x);
    for k in 1..=n {
        stepper.draw(&mut rng, &mut noise);
        stepper.advance(&mut x, &noise);
        if !finite(&x) {
            return Err(Error::NonFinite {
                step: k,
                time: k as f64 * h,
            });
        }
        if escaped(&x) {
            path.meta.escaped_at = Some(k);
            path.push(t_end, &x);
            break;
        }
        if record.keep(k, n) {
            path.push(if k == n { t_end } else { k as f64 * h }, &x);
        }
    }
    Ok(path)
}

/// Runs `n` independent work units in parallel and returns their results in
/// index order, so the output never depends on the worker count.
pub fn par_paths<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}

/// Monte Carlo estimate of `E sup_{t ≤ T} |X_t|^p` for the frozen equation.
#[allow(clippy::too_many_arguments)]
pub fn frozen_sup_moment(
    sys: &MultiscaleSystem,
    y: &[f64],
    x0: &[f64],
    t_end: f64,
    dt: f64,
    p: f64,
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    sys.check_dims(x0, y)?;
    let n = step_count(t_end, dt)?;
    let h = t_end / n as f64;
    let sups = par_paths(n_paths, |i| {
        let mut stepper = FrozenStepper::new(sys, y, h)?;
        let mut rng = RngStream::new(seed, i).generator();
        let mut x = x0.to_vec();
        let mut noise = vec![0.0; x.len()];
        let mut sup = norm(&x);
        for k in 1..=n {
            stepper.draw(&mut rng, &mut noise);
            stepper.advance(&mut x, &noise);
            let r = norm(&x);
            if !r.is_finite() {
                return Err(Error::NonFinite {
                    step: k,
                    time: k as f64 * h,
                });
            }
            sup = sup.max(r);
        }
        Ok(sup.powf(p))
    })?;
    Ok(stats::mean_and_stderr(&sups))
}

/// Monte Carlo estimate of `E sup_{t ≤ T} |X^ε_t|^p` for the fast component
/// of the coupled system.
#[allow(clippy::too_many_arguments)]
pub fn fast_sup_moment(
    sys: &MultiscaleSystem,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    dt: f64,
    p: f64,
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    sys.check_dims(x0, y0)?;
    let n = step_count(t_end, dt)?;
    let h = t_end / n as f64;
    let sups = par_paths(n_paths, |i| {
        let mut stepper = MultiscaleStepper::new(sys, h)?;
        let mut rf = RngStream::fast(seed, i).generator();
        let mut rs = RngStream::slow(seed, i).generator();
        let (mut x, mut y) = (x0.to_vec(), y0.to_vec());
        let mut sup = norm(&x);
        for k in 1..=n {
            if !stepper.step(&mut x, &mut y, &mut rf, &mut rs) {
                return Err(Error::NonFinite {
                    step: k,
                    time: k as f64 * h,
                });
            }
            sup = sup.max(norm(&x));
        }
        Ok(sup.powf(p))
    })?;
    Ok(stats::mean_and_stderr(&sups))
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_engine::builtin::{lookup, toy, SystemOverrides};
    use crate::sde_engine::system::NoiseSwitch;
    use crate::stable_noise::{increment, sample_symmetric};

    #[test]
    fn pure_noise_step_is_one_slow_increment() {
        let sys = lookup("pure-noise", &SystemOverrides::default()).unwrap();
        let dt = 1e-3;
        let mut rf = RngStream::fast(3, 0).generator();
        let mut rs = RngStream::slow(3, 0).generator();
        let (_, y) = step_multiscale(&sys, (&[0.0], &[0.0]), dt, &mut rf, &mut rs).unwrap();
        let mut oracle = RngStream::slow(3, 0).generator();
        let inc = increment(&sys.law_slow, dt, &mut oracle).unwrap();
        assert_eq!(y[0], inc[0]);
    }

    #[test]
    fn unit_scale_step_matches_hand_rolled_update() {
        let sys = lookup(
            "nonlinear",
            &SystemOverrides {
                eps: Some(1.0),
                r0: Some(0.0),
                ..Default::default()
            },
        )
        .unwrap();
        let (x0, y0, dt) = (0.8, -0.3, 0.01);
        let mut rf = RngStream::fast(9, 4).generator();
        let mut rs = RngStream::slow(9, 4).generator();
        let (x, y) = step_multiscale(&sys, (&[x0], &[y0]), dt, &mut rf, &mut rs).unwrap();

        // Independent re-implementation of one Euler step.
        let mut rf = RngStream::fast(9, 4).generator();
        let mut rs = RngStream::slow(9, 4).generator();
        let a = sys.law_fast.alpha();
        let dl1 = dt.powf(1.0 / a) * sample_symmetric(a, &mut rf);
        let dl2 = dt.powf(1.0 / a) * sample_symmetric(a, &mut rs);
        let b = -x0 - 0.5 * f64::sin(x0) + 0.5 * f64::tanh(y0);
        let g = f64::sin(x0);
        assert!((x[0] - (x0 + b * dt + dl1)).abs() < 1e-14);
        assert!((y[0] - (y0 + g * dt + dl2)).abs() < 1e-14);
    }

    #[test]
    fn noiseless_fast_component_decays_exponentially() {
        let eps = 0.5;
        let sys = toy()
            .with_eps(eps)
            .unwrap()
            .with_noise(NoiseSwitch {
                fast: false,
                slow: false,
            });
        let dt = sys.max_multiscale_dt();
        let (px, _) =
            simulate_multiscale(&sys, &[2.0], &[0.0], 0.5, dt, 1, 0, Record::Every(10)).unwrap();
        for i in 0..px.len() {
            let t = px.times[i];
            let exact = 2.0 * (-t / (eps * eps)).exp();
            // Explicit Euler: relative error ≈ (t/ε²)·(dt/ε²)/2.
            assert!((px.state(i)[0] - exact).abs() <= 2.0 * 0.01 * t / (eps * eps) * exact + 1e-15);
        }
    }

    #[test]
    fn rejects_unresolved_fast_scale() {
        let sys = toy();
        let too_big = 2.0 * sys.max_multiscale_dt();
        assert!(simulate_multiscale(&sys, &[0.0], &[0.0], 1.0, too_big, 1, 0, Record::Terminal).is_err());
    }

    #[test]
    fn trajectories_are_reproducible() {
        let sys = toy().with_eps(0.3).unwrap();
        let dt = sys.max_multiscale_dt();
        let a = simulate_multiscale(&sys, &[0.0], &[0.0], 0.2, dt, 42, 7, Record::Every(5)).unwrap();
        let b = simulate_multiscale(&sys, &[0.0], &[0.0], 0.2, dt, 42, 7, Record::Every(5)).unwrap();
        assert_eq!(a, b);
        let c = simulate_multiscale(&sys, &[0.0], &[0.0], 0.2, dt, 42, 8, Record::Every(5)).unwrap();
        assert_ne!(a.1.states, c.1.states);
    }

    #[test]
    fn synchronous_coupling_contracts_exactly() {
        let sys = toy();
        let dt = 0.01;
        let p1 = simulate_frozen(&sys, &[0.0], &[4.0], 5.0, dt, 5, 0, Record::Every(1)).unwrap();
        let p2 = simulate_frozen(&sys, &[0.0], &[-1.0], 5.0, dt, 5, 0, Record::Every(1)).unwrap();
        for i in 0..p1.len() {
            let d = (p1.state(i)[0] - p2.state(i)[0]).abs();
            let exact = 5.0 * (-p1.times[i]).exp();
            assert!((d - exact).abs() <= 10.0 * dt * exact, "t = {}", p1.times[i]);
        }
    }

    #[test]
    fn par_paths_preserves_order() {
        let v = par_paths(100, |i| Ok(i * 2)).unwrap();
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }
}
