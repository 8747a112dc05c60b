//! Built-in coefficient sets and the name-keyed registry.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::system::{Coefficients, MultiscaleSystem, SecondDerivatives};
use crate::error::{invalid, Result};

/// Reference example: `b = -x`, `F = 0`, `G = sin x`, one fast and one slow coordinate.
#[derive(Debug, Clone, Copy, Default)]
pub struct Toy;

impl Coefficients for Toy {
    fn name(&self) -> &str {
        "toy"
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn b(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = -x[0];
    }
    fn f(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn g(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = x[0].sin();
    }
    fn slow_drift_vanishes(&self) -> bool {
        true
    }
    fn b_jac_x(&self, _x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, -1.0))
    }
    fn b_jac_y(&self, _x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(1, 1))
    }
    fn b_second(&self, _x: &[f64], _y: &[f64]) -> Option<SecondDerivatives> {
        Some(SecondDerivatives {
            xx: vec![DMatrix::zeros(1, 1)],
            xy: vec![DMatrix::zeros(1, 1)],
            yy: vec![DMatrix::zeros(1, 1)],
        })
    }
}

/// y-dependent extension of the toy: `b = -x + c·tanh(y)` and
/// `G = sin x - m(y)`.
///
/// The frozen invariant law is the toy's shifted by `c·tanh(y)`, and the
/// toy's stationary law has characteristic function `exp(-|ξ|^α/α)`, so
/// `m(y) = sin(c·tanh y)·exp(-1/α₁)` centers `G` exactly.
#[derive(Debug, Clone, Copy)]
pub struct DriftedToy {
    pub shift: f64,
    pub alpha_fast: f64,
}

impl DriftedToy {
    pub fn centering(&self, y: f64) -> f64 {
        (self.shift * y.tanh()).sin() * (-1.0 / self.alpha_fast).exp()
    }
}

fn sech2(y: f64) -> f64 {
    let c = y.cosh();
    1.0 / (c * c)
}

impl Coefficients for DriftedToy {
    fn name(&self) -> &str {
        "toy-drifted"
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn b(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = -x[0] + self.shift * y[0].tanh();
    }
    fn f(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn g(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = x[0].sin() - self.centering(y[0]);
    }
    fn slow_drift_vanishes(&self) -> bool {
        true
    }
    fn b_jac_x(&self, _x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, -1.0))
    }
    fn b_jac_y(&self, _x: &[f64], y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, self.shift * sech2(y[0])))
    }
    fn b_second(&self, _x: &[f64], y: &[f64]) -> Option<SecondDerivatives> {
        Some(SecondDerivatives {
            xx: vec![DMatrix::zeros(1, 1)],
            xy: vec![DMatrix::zeros(1, 1)],
            yy: vec![DMatrix::from_element(
                1,
                1,
                -2.0 * self.shift * sech2(y[0]) * y[0].tanh(),
            )],
        })
    }
}

/// Nonlinear dissipative drift `b = -x - 0.5 sin x + 0.5 tanh y` (γ = 0.5),
/// with `G = sin x` and `F = 0`. Used where the flows are not available in
/// closed form.
#[derive(Debug, Clone, Copy, Default)]
pub struct Nonlinear;

impl Coefficients for Nonlinear {
    fn name(&self) -> &str {
        "nonlinear"
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn b(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = -x[0] - 0.5 * x[0].sin() + 0.5 * y[0].tanh();
    }
    fn f(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn g(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = x[0].sin();
    }
    fn slow_drift_vanishes(&self) -> bool {
        true
    }
    fn b_jac_x(&self, x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, -1.0 - 0.5 * x[0].cos()))
    }
    fn b_jac_y(&self, _x: &[f64], y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, 0.5 * sech2(y[0])))
    }
    fn b_second(&self, x: &[f64], y: &[f64]) -> Option<SecondDerivatives> {
        Some(SecondDerivatives {
            xx: vec![DMatrix::from_element(1, 1, 0.5 * x[0].sin())],
            xy: vec![DMatrix::zeros(1, 1)],
            yy: vec![DMatrix::from_element(1, 1, -sech2(y[0]) * y[0].tanh())],
        })
    }
}

/// Two fast coordinates with a rotating linear drift
/// `b = A x`, `A = [[-1, ω], [-ω, -1]]` (γ = 1), `G = sin x₁`, `F = 0`.
#[derive(Debug, Clone, Copy)]
pub struct Rotating {
    pub omega: f64,
}

impl Rotating {
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[-1.0, self.omega, -self.omega, -1.0])
    }
}

impl Coefficients for Rotating {
    fn name(&self) -> &str {
        "rotating"
    }
    fn fast_dim(&self) -> usize {
        2
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn b(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = -x[0] + self.omega * x[1];
        out[1] = -self.omega * x[0] - x[1];
    }
    fn f(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn g(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = x[0].sin();
    }
    fn slow_drift_vanishes(&self) -> bool {
        true
    }
    fn b_jac_x(&self, _x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.matrix())
    }
    fn b_jac_y(&self, _x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(2, 1))
    }
}

/// The toy with a non-trivial slow drift `F(x, y) = x` (the averaged drift
/// vanishes by symmetry). `F` is unbounded, so A_F is deliberately violated.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearSlowDrift;

impl Coefficients for LinearSlowDrift {
    fn name(&self) -> &str {
        "toy-linear-f"
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn b(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = -x[0];
    }
    fn f(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }
    fn g(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = x[0].sin();
    }
    fn b_jac_x(&self, _x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, -1.0))
    }
    fn b_jac_y(&self, _x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(1, 1))
    }
}

/// The toy with `F(x, y) = min(x², M)`.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedSquare {
    pub level: f64,
}

impl Coefficients for TruncatedSquare {
    fn name(&self) -> &str {
        "toy-truncated-square"
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn b(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = -x[0];
    }
    fn f(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = (x[0] * x[0]).min(self.level);
    }
    fn g(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = x[0].sin();
    }
}

/// `b = F = G = 0`: both components are pure Lévy noise. Not dissipative.
#[derive(Debug, Clone, Copy, Default)]
pub struct PureNoise;

impl Coefficients for PureNoise {
    fn name(&self) -> &str {
        "pure-noise"
    }
    fn fast_dim(&self) -> usize {
        1
    }
    fn slow_dim(&self) -> usize {
        1
    }
    fn b(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn f(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn g(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn slow_drift_vanishes(&self) -> bool {
        true
    }
    fn b_jac_x(&self, _x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(1, 1))
    }
    fn b_jac_y(&self, _x: &[f64], _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(1, 1))
    }
}

/// Parameters a registry entry can be instantiated with. Unset fields take
/// the entry's defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SystemOverrides {
    pub eps: Option<f64>,
    pub r0: Option<f64>,
    pub alpha_fast: Option<f64>,
    pub alpha_slow: Option<f64>,
}

/// Default parameters of the reference example.
pub const TOY_ALPHA_FAST: f64 = 1.5;
pub const TOY_ALPHA_SLOW: f64 = 1.5;
pub const TOY_R0: f64 = 1.0 - 1.0 / TOY_ALPHA_FAST;
pub const TOY_EPS: f64 = 0.1;

pub const REGISTRY: &[(&str, &str)] = &[
    ("toy", "b = -x, F = 0, G = sin x"),
    ("toy-drifted", "b = -x + 0.1 tanh y, F = 0, G = sin x - m(y) (exactly centered)"),
    ("nonlinear", "b = -x - 0.5 sin x + 0.5 tanh y, F = 0, G = sin x"),
    ("rotating", "two fast coordinates, b = A x with a rotation, G = sin x1"),
    ("toy-linear-f", "toy with F(x, y) = x"),
    ("toy-truncated-square", "toy with F(x, y) = min(x^2, 4)"),
    ("pure-noise", "b = F = G = 0"),
];

/// Looks up a registered system by name.
pub fn lookup(name: &str, o: &SystemOverrides) -> Result<MultiscaleSystem> {
    let alpha_fast = o.alpha_fast.unwrap_or(TOY_ALPHA_FAST);
    let alpha_slow = o.alpha_slow.unwrap_or(TOY_ALPHA_SLOW);
    let eps = o.eps.unwrap_or(TOY_EPS);
    let r0 = o.r0.unwrap_or(1.0 - 1.0 / alpha_fast);
    let (coeffs, gamma, k1, k2): (Arc<dyn Coefficients>, f64, f64, f64) = match name {
        "toy" => (Arc::new(Toy), 1.0, 1.0, 1.0),
        "toy-drifted" => (
            Arc::new(DriftedToy {
                shift: 0.1,
                alpha_fast,
            }),
            1.0,
            1.0,
            2.0,
        ),
        "nonlinear" => (Arc::new(Nonlinear), 0.5, 1.0, 1.0),
        "rotating" => (Arc::new(Rotating { omega: 0.5 }), 1.0, 1.0, 1.0),
        "toy-linear-f" => (Arc::new(LinearSlowDrift), 1.0, 1.0, 1.0),
        "toy-truncated-square" => (Arc::new(TruncatedSquare { level: 4.0 }), 1.0, 16.0, 1.0),
        "pure-noise" => (Arc::new(PureNoise), 1.0, 1.0, 1.0),
        other => return Err(invalid("system", format!("unknown system `{other}`"))),
    };
    MultiscaleSystem::new(coeffs, eps, r0, alpha_fast, alpha_slow, gamma, k1, k2)
}

/// The reference example at its default parameters.
pub fn toy() -> MultiscaleSystem {
    lookup("toy", &SystemOverrides::default()).expect("built-in toy parameters are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_engine::system::Hypothesis;

    #[test]
    fn every_registered_name_resolves() {
        for (name, _) in REGISTRY {
            let sys = lookup(name, &SystemOverrides::default()).unwrap();
            assert_eq!(sys.name(), *name);
        }
        assert!(lookup("nope", &SystemOverrides::default()).is_err());
    }

    #[test]
    fn toy_sits_on_r0_boundary_without_blocking() {
        let warnings = toy().validate();
        assert!(warnings.iter().all(|w| !w.blocking), "{warnings:?}");
        assert!(warnings.iter().any(|w| w.hypothesis == Hypothesis::R0Range));
    }

    #[test]
    fn r0_violation_is_named() {
        let sys = lookup(
            "toy",
            &SystemOverrides {
                r0: Some(0.9),
                ..Default::default()
            },
        )
        .unwrap();
        let w = sys.validate();
        let r0 = w.iter().find(|w| w.hypothesis == Hypothesis::R0Range).unwrap();
        assert!(r0.blocking);
        assert!(r0.message.contains("r0 outside (0, 1/3)"), "{}", r0.message);
    }

    #[test]
    fn non_dissipative_and_unbounded_systems_are_flagged() {
        let w = lookup("pure-noise", &SystemOverrides::default()).unwrap().validate();
        assert!(w.iter().any(|w| w.hypothesis == Hypothesis::Ab));
        let w = lookup("toy-linear-f", &SystemOverrides::default()).unwrap().validate();
        assert!(w.iter().any(|w| w.hypothesis == Hypothesis::AF));
    }

    #[test]
    fn conforming_systems_pass_spot_checks() {
        for name in ["toy-drifted", "nonlinear", "rotating"] {
            let w = lookup(name, &SystemOverrides::default()).unwrap().validate();
            assert!(
                w.iter().all(|w| w.hypothesis == Hypothesis::R0Range && !w.blocking),
                "{name}: {w:?}"
            );
        }
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        let h = 1e-6;
        for name in ["toy-drifted", "nonlinear"] {
            let sys = lookup(name, &SystemOverrides::default()).unwrap();
            let c = sys.coeffs.as_ref();
            let (x, y) = (0.7, -0.4);
            let mut p = [0.0];
            let mut q = [0.0];
            c.b(&[x + h], &[y], &mut p);
            c.b(&[x - h], &[y], &mut q);
            let jx = c.b_jac_x(&[x], &[y]).unwrap()[(0, 0)];
            assert!(((p[0] - q[0]) / (2.0 * h) - jx).abs() < 1e-7);
            c.b(&[x], &[y + h], &mut p);
            c.b(&[x], &[y - h], &mut q);
            let jy = c.b_jac_y(&[x], &[y]).unwrap()[(0, 0)];
            assert!(((p[0] - q[0]) / (2.0 * h) - jy).abs() < 1e-7);
            let s = c.b_second(&[x], &[y]).unwrap();
            let yy_fd = (c.b_jac_y(&[x], &[y + h]).unwrap()[(0, 0)]
                - c.b_jac_y(&[x], &[y - h]).unwrap()[(0, 0)])
                / (2.0 * h);
            assert!((yy_fd - s.yy[0][(0, 0)]).abs() < 1e-7);
            let xx_fd = (c.b_jac_x(&[x + h], &[y]).unwrap()[(0, 0)]
                - c.b_jac_x(&[x - h], &[y]).unwrap()[(0, 0)])
                / (2.0 * h);
            assert!((xx_fd - s.xx[0][(0, 0)]).abs() < 1e-7);
        }
    }
}
