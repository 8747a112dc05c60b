use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::stable_noise::StableLaw;

/// Second derivatives of the fast drift `b`, one matrix per output component `i`:
/// `xx[i] = ∇²_x b_i` (n×n), `xy[i] = ∂_x ∂_y b_i` (n×m), `yy[i] = ∇²_y b_i` (m×m).
#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivatives {
    pub xx: Vec<DMatrix<f64>>,
    pub xy: Vec<DMatrix<f64>>,
    pub yy: Vec<DMatrix<f64>>,
}

/// Drift coefficients of the multiscale system
///
/// ```text
/// dX = ε^{-2} b(X, Y) dt + ε^{-2/α₁} dL¹
/// dY = [F(X, Y) + ε^{-r₀} G(X, Y)] dt + dL²
/// ```
///
/// Evaluations write into caller-provided buffers so the inner simulation
/// loops never allocate. Jacobians of `b` are optional and, when present,
/// must be exact closed forms.
pub trait Coefficients: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn fast_dim(&self) -> usize;
    fn slow_dim(&self) -> usize;

    fn b(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn f(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn g(&self, x: &[f64], y: &[f64], out: &mut [f64]);

    /// `F ≡ 0` identically (the averaged drift is then zero everywhere).
    fn slow_drift_vanishes(&self) -> bool {
        false
    }

    fn b_jac_x(&self, _x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    fn b_jac_y(&self, _x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    fn b_second(&self, _x: &[f64], _y: &[f64]) -> Option<SecondDerivatives> {
        None
    }
}

/// Which noises are active. Disabling noise is a test hook for checking the
/// deterministic skeleton against ODE solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NoiseSwitch {
    pub fast: bool,
    pub slow: bool,
}

impl Default for NoiseSwitch {
    fn default() -> Self {
        Self {
            fast: true,
            slow: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiscaleSystem {
    pub coeffs: Arc<dyn Coefficients>,
    pub eps: f64,
    pub r0: f64,
    pub law_fast: StableLaw,
    pub law_slow: StableLaw,
    /// Dissipativity constant of `b`.
    pub gamma: f64,
    pub k1: f64,
    pub k2: f64,
    pub noise: NoiseSwitch,
}

/// Step size of the fast time scale relative to `1/γ`.
pub const FAST_STEP_FRACTION: f64 = 0.01;

impl MultiscaleSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        coeffs: Arc<dyn Coefficients>,
        eps: f64,
        r0: f64,
        alpha_fast: f64,
        alpha_slow: f64,
        gamma: f64,
        k1: f64,
        k2: f64,
    ) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(invalid("eps", "must be positive"));
        }
        if !(gamma > 0.0) {
            return Err(invalid("gamma", "must be positive"));
        }
        if !(k1 > 0.0 && k2 > 0.0) {
            return Err(invalid("K1/K2", "must be positive"));
        }
        if !r0.is_finite() {
            return Err(invalid("r0", "must be finite"));
        }
        let law_fast = StableLaw::new(alpha_fast, coeffs.fast_dim())?;
        let law_slow = StableLaw::new(alpha_slow, coeffs.slow_dim())?;
        Ok(Self {
            coeffs,
            eps,
            r0,
            law_fast,
            law_slow,
            gamma,
            k1,
            k2,
            noise: NoiseSwitch::default(),
        })
    }

    pub fn name(&self) -> &str {
        self.coeffs.name()
    }

    pub fn fast_dim(&self) -> usize {
        self.coeffs.fast_dim()
    }

    pub fn slow_dim(&self) -> usize {
        self.coeffs.slow_dim()
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(invalid("eps", "must be positive"));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn with_r0(mut self, r0: f64) -> Self {
        self.r0 = r0;
        self
    }

    pub fn with_noise(mut self, noise: NoiseSwitch) -> Self {
        self.noise = noise;
        self
    }

    /// Largest admissible step of the coupled system, `ε² · 0.01/γ`.
    pub fn max_multiscale_dt(&self) -> f64 {
        self.eps * self.eps * FAST_STEP_FRACTION / self.gamma
    }

    /// Default step of the frozen equation, `0.01/γ`.
    pub fn frozen_dt(&self) -> f64 {
        FAST_STEP_FRACTION / self.gamma
    }

    /// Upper end of the admissible homogenizing-index range, `1 - 1/α₁`.
    pub fn r0_upper(&self) -> f64 {
        1.0 - 1.0 / self.law_fast.alpha()
    }

    pub fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.fast_dim() {
            return Err(Error::Dimension {
                expected: self.fast_dim(),
                got: x.len(),
            });
        }
        if y.len() != self.slow_dim() {
            return Err(Error::Dimension {
                expected: self.slow_dim(),
                got: y.len(),
            });
        }
        Ok(())
    }

    /// Numerical spot checks of the structural hypotheses on random point
    /// pairs. Violations are reported, never raised: non-conforming systems
    /// are legitimate objects of study.
    pub fn validate(&self) -> Vec<HypothesisWarning> {
        let mut out = Vec::new();
        let upper = self.r0_upper();
        if self.r0 <= 0.0 || self.r0 > upper + 1e-12 {
            out.push(HypothesisWarning {
                hypothesis: Hypothesis::R0Range,
                blocking: true,
                message: format!("r0 outside (0, {}): r0 = {}", fmt_ratio(upper), self.r0),
            });
        } else if (self.r0 - upper).abs() <= 1e-12 {
            out.push(HypothesisWarning {
                hypothesis: Hypothesis::R0Range,
                blocking: false,
                message: format!("r0 = {} sits on the upper end 1 - 1/alpha1", self.r0),
            });
        }
        out.extend(self.spot_check(256, 0x5eed));
        out
    }

    fn spot_check(&self, pairs: usize, seed: u64) -> Vec<HypothesisWarning> {
        let (n, m) = (self.fast_dim(), self.slow_dim());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |k: usize, scale: f64| -> Vec<f64> {
            (0..k).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
        };
        let c = self.coeffs.as_ref();
        let (mut b1, mut b2) = (vec![0.0; n], vec![0.0; n]);
        let (mut v1, mut v2) = (vec![0.0; m], vec![0.0; m]);
        let mut worst_diss = f64::NEG_INFINITY;
        let (mut f_lip, mut f_sup, mut g_lip, mut g_sup) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for k in 0..pairs {
            let scale = if k % 2 == 0 { 3.0 } else { 30.0 };
            let (x1, x2, y1, y2) = (draw(n, scale), draw(n, scale), draw(m, scale), draw(m, scale));
            c.b(&x1, &y1, &mut b1);
            c.b(&x2, &y1, &mut b2);
            let dx2: f64 = x1.iter().zip(&x2).map(|(a, b)| (a - b).powi(2)).sum();
            let dy2: f64 = y1.iter().zip(&y2).map(|(a, b)| (a - b).powi(2)).sum();
            let inner: f64 = (0..n).map(|i| (b1[i] - b2[i]) * (x1[i] - x2[i])).sum();
            if dx2 > 1e-12 {
                worst_diss = worst_diss.max(inner / dx2);
            }
            let denom = dx2 + dy2;
            c.f(&x1, &y1, &mut v1);
            c.f(&x2, &y2, &mut v2);
            let df: f64 = v1.iter().zip(&v2).map(|(a, b)| (a - b).powi(2)).sum();
            f_lip = f_lip.max(df / denom);
            f_sup = f_sup.max(v1.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            c.g(&x1, &y1, &mut v1);
            c.g(&x2, &y2, &mut v2);
            let dg: f64 = v1.iter().zip(&v2).map(|(a, b)| (a - b).powi(2)).sum();
            g_lip = g_lip.max(dg / denom);
            g_sup = g_sup.max(v1.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        }
        let mut out = Vec::new();
        let tol = 1e-9;
        if worst_diss > -self.gamma + tol {
            out.push(HypothesisWarning {
                hypothesis: Hypothesis::Ab,
                blocking: true,
                message: format!(
                    "b is not gamma-dissipative: <b(x1)-b(x2), x1-x2>/|x1-x2|^2 reached {} > -gamma = {}",
                    fmt_short(worst_diss),
                    -self.gamma
                ),
            });
        }
        if f_lip > self.k1 + tol || f_sup > self.k1 + tol {
            out.push(HypothesisWarning {
                hypothesis: Hypothesis::AF,
                blocking: true,
                message: format!(
                    "F violates the K1 = {} bounds (Lipschitz ratio {}, sup {})",
                    self.k1,
                    fmt_short(f_lip),
                    fmt_short(f_sup)
                ),
            });
        }
        if g_lip > self.k2 + tol || g_sup > self.k2 + tol {
            out.push(HypothesisWarning {
                hypothesis: Hypothesis::AG1,
                blocking: true,
                message: format!(
                    "G violates the K2 = {} bounds (Lipschitz ratio {}, sup {})",
                    self.k2,
                    fmt_short(g_lip),
                    fmt_short(g_sup)
                ),
            });
        }
        out
    }
}

// Small-denominator fractions print as `p/q`, everything else as a short decimal.
fn fmt_ratio(v: f64) -> String {
    for q in 1..=12u32 {
        let p = (v * q as f64).round();
        if (v * q as f64 - p).abs() < 1e-9 {
            return if q == 1 {
                format!("{p}")
            } else {
                format!("{p}/{q}")
            };
        }
    }
    fmt_short(v)
}

fn fmt_short(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    /// Dissipativity of the fast drift.
    Ab,
    /// Lipschitz and boundedness of the slow drift.
    AF,
    /// Lipschitz, boundedness and derivative bounds of the homogenization drift.
    AG1,
    /// Centering of the homogenization drift under the frozen invariant measure.
    AG2,
    /// `0 < r0 < 1 - 1/α₁`.
    R0Range,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::Ab => "A_b",
            Hypothesis::AF => "A_F",
            Hypothesis::AG1 => "A_G1",
            Hypothesis::AG2 => "A_G2",
            Hypothesis::R0Range => "r0-range",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisWarning {
    pub hypothesis: Hypothesis,
    /// Blocking warnings stop a batch run unless it is forced.
    pub blocking: bool,
    pub message: String,
}

impl fmt::Display for HypothesisWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.hypothesis, self.message)
    }
}
