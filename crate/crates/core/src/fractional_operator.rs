//! One-dimensional fractional Laplacian and the generators built on it.
//!
//! For a symmetric Lévy measure `ν(dz) = c_{1,α}|z|^{-1-α} dz` the compensator
//! term cancels and
//!
//! ```text
//! -(-Δ)^{α/2} f(x) = c ∫_0^∞ [f(x+z) + f(x-z) - 2f(x)] z^{-1-α} dz.
//! ```
//!
//! The integral is split into three regions:
//! * `z < δ`: second-order Taylor, `c f''(x) δ^{2-α}/(2-α)`, with `f''` from
//!   central differences at the profile spacing `h` and `δ = h^{2/(4-α)}`;
//! * `δ ≤ z ≤ R`: adaptive Gauss–Kronrod on geometric then uniform panels;
//! * `z > R`: closed form from the profile's tail model.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{self, Quad};
use crate::sde_engine::MultiscaleSystem;
use crate::stable_noise::{levy_constant, StableLaw};

/// Behavior of a profile outside the region where it is tabulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    /// `f = left` below `lo` and `f = right` above `hi`.
    DecayToConstant {
        lo: f64,
        hi: f64,
        left: f64,
        right: f64,
    },
    /// `f(x + period) = f(x)` everywhere.
    Periodic { period: f64 },
}

/// A function of one variable that the fractional operator can act on.
pub trait Profile: Sync {
    fn eval(&self, x: f64) -> f64;
    fn tail(&self) -> Option<TailModel>;
}

/// Closure-backed profile.
pub struct FnProfile<F> {
    f: F,
    tail: Option<TailModel>,
}

impl<F: Fn(f64) -> f64 + Sync> FnProfile<F> {
    pub fn new(f: F, tail: Option<TailModel>) -> Self {
        Self { f, tail }
    }

    pub fn periodic(f: F, period: f64) -> Self {
        Self::new(f, Some(TailModel::Periodic { period }))
    }

    /// `f` is constant outside `[lo, hi]`; the constants are read off `f` itself.
    pub fn constant_outside(f: F, lo: f64, hi: f64) -> Self {
        let (left, right) = (f(lo), f(hi));
        Self::new(
            f,
            Some(TailModel::DecayToConstant {
                lo,
                hi,
                left,
                right,
            }),
        )
    }
}

impl<F: Fn(f64) -> f64 + Sync> Profile for FnProfile<F> {
    fn eval(&self, x: f64) -> f64 {
        match self.tail {
            Some(TailModel::DecayToConstant {
                lo,
                hi,
                left,
                right,
            }) => {
                if x < lo {
                    left
                } else if x > hi {
                    right
                } else {
                    (self.f)(x)
                }
            }
            _ => (self.f)(x),
        }
    }

    fn tail(&self) -> Option<TailModel> {
        self.tail
    }
}

/// Values on a uniform grid, interpolated by a natural cubic spline and
/// continued outside the grid by a tail model (edge values by default).
#[derive(Debug, Clone, PartialEq)]
pub struct GridProfile {
    x0: f64,
    spacing: f64,
    values: Vec<f64>,
    second: Vec<f64>,
    tail: Option<TailModel>,
}

impl GridProfile {
    pub fn new(x0: f64, spacing: f64, values: Vec<f64>, tail: Option<TailModel>) -> Result<Self> {
        if values.len() < 3 {
            return Err(invalid("values", "need at least three grid values"));
        }
        if !(spacing > 0.0) {
            return Err(invalid("spacing", "must be positive"));
        }
        let second = natural_spline_second_derivatives(spacing, &values);
        Ok(Self {
            x0,
            spacing,
            values,
            second,
            tail,
        })
    }

    /// Grid profile held constant at its edge values outside the grid.
    pub fn with_constant_tails(x0: f64, spacing: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let hi = x0 + spacing * (n.max(1) - 1) as f64;
        let tail = TailModel::DecayToConstant {
            lo: x0,
            hi,
            left: values[0],
            right: values[n - 1],
        };
        Self::new(x0, spacing, values, Some(tail))
    }

    pub fn lo(&self) -> f64 {
        self.x0
    }

    pub fn hi(&self) -> f64 {
        self.x0 + self.spacing * (self.values.len() - 1) as f64
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn interpolate(&self, x: f64) -> f64 {
        let h = self.spacing;
        let n = self.values.len();
        let s = ((x - self.x0) / h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let a = (self.x0 + (i + 1) as f64 * h - x) / h;
        let b = 1.0 - a;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / 6.0
    }
}

impl Profile for GridProfile {
    fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = (self.lo(), self.hi());
        if x >= lo && x <= hi {
            return self.interpolate(x);
        }
        match self.tail {
            Some(TailModel::DecayToConstant { left, right, .. }) => {
                if x < lo {
                    left
                } else {
                    right
                }
            }
            Some(TailModel::Periodic { period }) => {
                let shifted = lo + (x - lo).rem_euclid(period);
                self.interpolate(shifted.min(hi))
            }
            None => f64::NAN,
        }
    }

    fn tail(&self) -> Option<TailModel> {
        self.tail
    }
}

fn natural_spline_second_derivatives(h: f64, y: &[f64]) -> Vec<f64> {
    // Tridiagonal system  M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i+1} - 2y_i + y_{i-1}) / h²,
    // M_0 = M_{n-1} = 0, solved by the Thomas algorithm.
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let k = n - 2;
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        let rhs = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
        let denom = 4.0 - if j > 0 { c[j - 1] } else { 0.0 };
        c[j] = 1.0 / denom;
        d[j] = (rhs - if j > 0 { d[j - 1] } else { 0.0 }) / denom;
    }
    for j in (0..k).rev() {
        let next = if j + 1 < k { m[j + 2] } else { 0.0 };
        m[j + 1] = d[j] - c[j] * next;
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracConfig {
    /// Profile spacing `h`: finite-difference step and the source of `δ`.
    pub spacing: f64,
    /// Absolute tolerance for the middle-region quadrature.
    pub tol: f64,
    /// Minimum outer radius for periodic tails, in units of `max(1, period)`.
    pub periodic_reach: f64,
}

impl Default for FracConfig {
    fn default() -> Self {
        Self {
            spacing: 1e-3,
            tol: 1e-9,
            periodic_reach: 200.0,
        }
    }
}

impl FracConfig {
    pub fn with_spacing(spacing: f64) -> Self {
        Self {
            spacing,
            ..Self::default()
        }
    }

    /// Inner cutoff `δ = h^{2/(4-α)}`.
    pub fn inner_cutoff(&self, alpha: f64) -> f64 {
        self.spacing.powf(2.0 / (4.0 - alpha))
    }
}

fn middle_breaks(delta: f64, r: f64, uniform_width: f64) -> Vec<f64> {
    let mut breaks = vec![delta];
    let mut z = delta;
    while 2.0 * z < r.min(1.0) {
        z *= 2.0;
        breaks.push(z);
    }
    if r > z {
        breaks.extend(quadrature::panel_breaks(z, r, uniform_width).into_iter().skip(1));
    }
    breaks
}

/// `-(-Δ)^{α/2} f(x)` with an absolute error estimate.
pub fn frac_laplacian(f: &dyn Profile, alpha: f64, x: f64, cfg: &FracConfig) -> Result<Quad> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(invalid("alpha", format!("{alpha} not in (0, 2)")));
    }
    let tail = f.tail().ok_or(Error::MissingTailModel {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    })?;
    let c = levy_constant(1, alpha);
    let h = cfg.spacing;
    let delta = cfg.inner_cutoff(alpha);
    let fx = f.eval(x);
    let (fp, fm) = (f.eval(x + h), f.eval(x - h));
    let (fp2, fm2) = (f.eval(x + 2.0 * h), f.eval(x - 2.0 * h));
    let f2 = (fp - 2.0 * fx + fm) / (h * h);
    let f4 = (fp2 - 4.0 * fp + 6.0 * fx - 4.0 * fm + fm2) / (h * h * h * h);

    let inner_weight = delta.powf(2.0 - alpha) / (2.0 - alpha);
    let inner = Quad {
        value: c * f2 * inner_weight,
        error: c * f4.abs()
            * (delta.powf(4.0 - alpha) / (12.0 * (4.0 - alpha)) + h * h / 12.0 * inner_weight),
    };

    let g = |z: f64| (f.eval(x + z) + f.eval(x - z) - 2.0 * fx) * z.powf(-1.0 - alpha);

    let (middle, outer) = match tail {
        TailModel::DecayToConstant {
            lo,
            hi,
            left,
            right,
        } => {
            let r = (hi - x).max(x - lo).max(delta);
            let middle = quadrature::integrate_panels(g, &middle_breaks(delta, r, 1.0), cfg.tol);
            let outer = Quad {
                value: (left + right - 2.0 * fx) * r.powf(-alpha) / alpha,
                error: 0.0,
            };
            (middle, outer)
        }
        TailModel::Periodic { period } => {
            if !(period > 0.0) {
                return Err(invalid("period", "must be positive"));
            }
            let cycles = (cfg.periodic_reach * period.max(1.0) / period).ceil();
            let r = delta + cycles * period;
            let middle = quadrature::integrate_panels(
                g,
                &middle_breaks(delta, r, (period / 4.0).min(1.0)),
                cfg.tol,
            );
            let mean = quadrature::integrate(|u| f.eval(u), 0.0, period, cfg.tol).value / period;
            let amplitude = 2.0 * (0..64)
                .map(|k| (f.eval(k as f64 * period / 64.0) - mean).abs())
                .fold(0.0, f64::max);
            let outer = Quad {
                value: 2.0 * (mean - fx) * r.powf(-alpha) / alpha,
                // Oscillating remainder after removing the period mean.
                error: amplitude * period * (1.0 + alpha) * r.powf(-2.0 - alpha),
            };
            (middle, outer)
        }
    };
    let middle = quadrature::check(middle, cfg.tol)?;
    let total = inner
        + Quad {
            value: c * middle.value,
            error: c * middle.error,
        }
        + Quad {
            value: c * outer.value,
            error: c * outer.error,
        };
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum GeneratorKind {
    /// Frozen fast generator `L₁ = -(-Δₓ)^{α₁/2} + b(·, y)·∇ₓ`.
    FrozenFast,
    /// Averaged generator `L₂ = -(-Δ_y)^{α₂/2} + F̄·∇_y`.
    Averaged,
    Plain,
}

pub type Drift1d = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `-(-Δ)^{α/2} + drift·∇` in one dimension.
#[derive(Clone)]
pub struct GeneratorSpec {
    pub law: StableLaw,
    pub drift: Drift1d,
    pub kind: GeneratorKind,
}

impl std::fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("law", &self.law)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl GeneratorSpec {
    pub fn new(law: StableLaw, drift: Drift1d, kind: GeneratorKind) -> Result<Self> {
        if law.dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: law.dim(),
            });
        }
        Ok(Self { law, drift, kind })
    }

    pub fn plain(law: StableLaw, drift: Drift1d) -> Result<Self> {
        Self::new(law, drift, GeneratorKind::Plain)
    }

    /// `L₁` of a one-dimensional fast component at frozen slow value `y`.
    pub fn frozen_fast(sys: &MultiscaleSystem, y: &[f64]) -> Result<Self> {
        if sys.fast_dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: sys.fast_dim(),
            });
        }
        if y.len() != sys.slow_dim() {
            return Err(Error::Dimension {
                expected: sys.slow_dim(),
                got: y.len(),
            });
        }
        let coeffs = sys.coeffs.clone();
        let y = y.to_vec();
        let drift: Drift1d = Arc::new(move |x: f64| {
            let mut out = [0.0];
            coeffs.b(&[x], &y, &mut out);
            out[0]
        });
        Self::new(sys.law_fast, drift, GeneratorKind::FrozenFast)
    }
}

/// `L f(x) = -(-Δ)^{α/2} f(x) + drift(x) f'(x)`, with `f'` by central differences.
pub fn apply_generator(g: &GeneratorSpec, f: &dyn Profile, x: f64, cfg: &FracConfig) -> Result<Quad> {
    let frac = frac_laplacian(f, g.law.alpha(), x, cfg)?;
    let h = cfg.spacing;
    let slope = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
    let drift = (g.drift)(x);
    let third = (f.eval(x + 2.0 * h) - 2.0 * f.eval(x + h) + 2.0 * f.eval(x - h) - f.eval(x - 2.0 * h))
        / (2.0 * h * h * h);
    Ok(frac
        + Quad {
            value: drift * slope,
            error: drift.abs() * third.abs() * h * h / 6.0,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos_k(k: f64) -> FnProfile<impl Fn(f64) -> f64 + Sync> {
        FnProfile::periodic(move |x: f64| (k * x).cos(), 2.0 * PI / k)
    }

    #[test]
    fn constants_are_annihilated() {
        let f = FnProfile::periodic(|_| 3.0, 1.0);
        let v = frac_laplacian(&f, 1.5, 0.4, &FracConfig::default()).unwrap();
        assert!(v.value.abs() < 1e-12);
        let f = FnProfile::constant_outside(|_| -2.0, -1.0, 1.0);
        let v = frac_laplacian(&f, 1.5, 0.4, &FracConfig::default()).unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        for alpha in [1.2, 1.5, 1.8] {
            for k in [0.5, 1.0, 2.0] {
                let f = cos_k(k);
                for x in [0.0, 0.3, 1.7] {
                    let v = frac_laplacian(&f, alpha, x, &FracConfig::default()).unwrap();
                    let exact = -k.powf(alpha) * (k * x).cos();
                    assert!(
                        (v.value - exact).abs() < 1e-4 * k.powf(alpha),
                        "alpha {alpha} k {k} x {x}: {} vs {exact}",
                        v.value
                    );
                }
            }
        }
    }

    #[test]
    fn generator_with_linear_drift() {
        let law = StableLaw::new(1.5, 1).unwrap();
        let g = GeneratorSpec::plain(law, Arc::new(|x| -x)).unwrap();
        let f = cos_k(1.0);
        for x in [-1.0, 0.0, 0.5, 2.0] {
            let v = apply_generator(&g, &f, x, &FracConfig::default()).unwrap();
            let exact = -x.cos() + x * x.sin();
            assert!((v.value - exact).abs() < 1e-3, "{x}: {} vs {exact}", v.value);
        }
    }

    #[test]
    fn zero_drift_reduces_to_fractional_laplacian() {
        let law = StableLaw::new(1.3, 1).unwrap();
        let g = GeneratorSpec::plain(law, Arc::new(|_| 0.0)).unwrap();
        let f = cos_k(1.3);
        let cfg = FracConfig::default();
        let a = apply_generator(&g, &f, 0.2, &cfg).unwrap().value;
        let b = frac_laplacian(&f, 1.3, 0.2, &cfg).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn strict_maximum_gives_nonpositive_value() {
        let f = FnProfile::constant_outside(|x: f64| (-x * x).exp(), -12.0, 12.0);
        let v = frac_laplacian(&f, 1.5, 0.0, &FracConfig::default()).unwrap();
        assert!(v.value < 0.0);
    }

    #[test]
    fn missing_tail_is_an_error() {
        let f = FnProfile::new(|x: f64| x.sin(), None);
        assert!(matches!(
            frac_laplacian(&f, 1.5, 0.0, &FracConfig::default()),
            Err(Error::MissingTailModel { .. })
        ));
    }

    #[test]
    fn spline_reproduces_cubic_interior_and_nodes() {
        let xs: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let g = GridProfile::with_constant_tails(-2.0, 0.1, vals.clone()).unwrap();
        for (x, v) in xs.iter().zip(&vals) {
            assert!((g.eval(*x) - v).abs() < 1e-12);
        }
        assert!((g.eval(0.05) - 0.05f64.sin()).abs() < 1e-5);
        assert_eq!(g.eval(5.0), vals[40]);
        assert_eq!(g.eval(-5.0), vals[0]);
    }

    #[test]
    fn grid_profile_of_gaussian_matches_analytic_profile() {
        // Same function tabulated on a grid and evaluated directly.
        let h = 0.05;
        let n = 481;
        let vals: Vec<f64> = (0..n).map(|i| (-(-12.0 + h * i as f64).powi(2)).exp()).collect();
        let grid = GridProfile::with_constant_tails(-12.0, h, vals).unwrap();
        let exact = FnProfile::constant_outside(|x: f64| (-x * x).exp(), -12.0, 12.0);
        for x in [-1.0, 0.0, 0.75] {
            let a = frac_laplacian(&grid, 1.5, x, &FracConfig::with_spacing(h)).unwrap().value;
            let b = frac_laplacian(&exact, 1.5, x, &FracConfig::default()).unwrap().value;
            assert!((a - b).abs() < 2e-3, "{x}: {a} vs {b}");
        }
    }
}
