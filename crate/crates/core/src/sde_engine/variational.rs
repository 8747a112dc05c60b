//! First and second variational flows of the frozen equation.
//!
//! The noise is additive, so along a fixed base path the derivatives of
//! `X^{x,y}_t` with respect to the initial point and the frozen slow value
//! solve linear ODEs with path-dependent coefficients:
//!
//! ```text
//! d∇ₓX   = A_t ∇ₓX dt,                      ∇ₓX₀ = I
//! d∇_yX  = (A_t ∇_yX + ∂_y b) dt,           ∇_yX₀ = 0
//! d∂²_{ab}X = (A_t ∂²_{ab}X + S_{ab}) dt,    ∂²X₀ = 0
//! ```
//!
//! with `A_t = ∇ₓb(X_t, y)` and `S` collecting the second derivatives of `b`
//! contracted against `∇_yX`. Each step uses the exponential integrator
//! `J ← exp(A dt)(J + dt·source)`, exact when `A` is constant.

use nalgebra::DMatrix;

use super::path::{PathMeta, Record, SamplePath};
use super::simulate::{step_count, FrozenStepper};
use super::system::MultiscaleSystem;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowOrder {
    First,
    Second,
}

#[derive(Debug, Clone)]
pub struct VariationalFlow {
    pub base_path: SamplePath,
    /// `∇ₓX_t`, n×n, one per recorded time.
    pub jac_x: Vec<DMatrix<f64>>,
    /// `∇_yX_t`, n×m.
    pub jac_y: Vec<DMatrix<f64>>,
    /// `∇²_yX_t`: for each recorded time, one m×m matrix per fast component.
    pub jac_yy: Option<Vec<Vec<DMatrix<f64>>>>,
}

fn missing(sys: &MultiscaleSystem, what: &'static str) -> Error {
    Error::MissingDerivative {
        what,
        system: sys.name().to_string(),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_variational(
    sys: &MultiscaleSystem,
    y: &[f64],
    x0: &[f64],
    t_end: f64,
    dt: f64,
    seed: u64,
    stream: u64,
    order: FlowOrder,
    record: Record,
) -> Result<VariationalFlow> {
    sys.check_dims(x0, y)?;
    let (n, m) = (sys.fast_dim(), sys.slow_dim());
    let c = sys.coeffs.as_ref();
    if c.b_jac_x(x0, y).is_none() {
        return Err(missing(sys, "Jacobian of b in x"));
    }
    if c.b_jac_y(x0, y).is_none() {
        return Err(missing(sys, "Jacobian of b in y"));
    }
    if order == FlowOrder::Second && c.b_second(x0, y).is_none() {
        return Err(missing(sys, "second derivatives of b"));
    }

    let steps = step_count(t_end, dt)?;
    let h = t_end / steps as f64;
    let mut stepper = FrozenStepper::new(sys, y, h)?;
    let mut rng = RngStream::new(seed, stream).generator();
    let mut base = SamplePath::new(
        n,
        PathMeta {
            system: sys.name().to_string(),
            seed,
            stream,
            escaped_at: None,
        },
    );

    let mut x = x0.to_vec();
    let mut noise = vec![0.0; n];
    let mut jx = DMatrix::<f64>::identity(n, n);
    let mut jy = DMatrix::<f64>::zeros(n, m);
    // Second variation stored per component i as an m×m matrix.
    let mut hyy: Vec<DMatrix<f64>> = vec![DMatrix::zeros(m, m); n];

    let mut out_x = vec![jx.clone()];
    let mut out_y = vec![jy.clone()];
    let mut out_yy = vec![hyy.clone()];
    base.push(0.0, &x);

    for k in 1..=steps {
        let a = c.b_jac_x(&x, y).ok_or_else(|| missing(sys, "Jacobian of b in x"))?;
        let by = c.b_jac_y(&x, y).ok_or_else(|| missing(sys, "Jacobian of b in y"))?;
        let prop = (&a * h).exp();

        if order == FlowOrder::Second {
            let sd = c
                .b_second(&x, y)
                .ok_or_else(|| missing(sys, "second derivatives of b"))?;
            // S^i = Jᵀ B^i_xx J + Jᵀ B^i_xy + (B^i_xy)ᵀ J + B^i_yy
            let sources: Vec<DMatrix<f64>> = (0..n)
                .map(|i| {
                    jy.transpose() * &sd.xx[i] * &jy
                        + jy.transpose() * &sd.xy[i]
                        + sd.xy[i].transpose() * &jy
                        + &sd.yy[i]
                })
                .collect();
            let mut next = vec![DMatrix::zeros(m, m); n];
            for ra in 0..m {
                for rb in 0..m {
                    let v = nalgebra::DVector::from_iterator(
                        n,
                        (0..n).map(|i| hyy[i][(ra, rb)] + h * sources[i][(ra, rb)]),
                    );
                    let w = &prop * v;
                    for i in 0..n {
                        next[i][(ra, rb)] = w[i];
                    }
                }
            }
            hyy = next;
        }
        jy = &prop * (&jy + &by * h);
        jx = &prop * &jx;

        stepper.draw(&mut rng, &mut noise);
        stepper.advance(&mut x, &noise);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                step: k,
                time: k as f64 * h,
            });
        }
        if record.keep(k, steps) {
            base.push(if k == steps { t_end } else { k as f64 * h }, &x);
            out_x.push(jx.clone());
            out_y.push(jy.clone());
            if order == FlowOrder::Second {
                out_yy.push(hyy.clone());
            }
        }
    }

    Ok(VariationalFlow {
        base_path: base,
        jac_x: out_x,
        jac_y: out_y,
        jac_yy: (order == FlowOrder::Second).then_some(out_yy),
    })
}

impl VariationalFlow {
    /// Operator norm bound `max_t ‖∇ₓX_t‖₂`.
    pub fn sup_jac_x_norm(&self) -> f64 {
        self.jac_x
            .iter()
            .map(|j| j.clone().svd(false, false).singular_values.max())
            .fold(0.0, f64::max)
    }
}

/// Directional derivative of the terminal state by common-random-number
/// finite differences: `(X^{x₀+δh}_T - X^{x₀}_T)/δ`.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_x(
    sys: &MultiscaleSystem,
    y: &[f64],
    x0: &[f64],
    direction: &[f64],
    delta: f64,
    t_end: f64,
    dt: f64,
    seed: u64,
    stream: u64,
) -> Result<Vec<f64>> {
    if direction.len() != x0.len() {
        return Err(invalid("direction", "dimension differs from x0"));
    }
    let shifted: Vec<f64> = x0.iter().zip(direction).map(|(a, d)| a + delta * d).collect();
    let base = super::simulate::simulate_frozen(sys, y, x0, t_end, dt, seed, stream, Record::Terminal)?;
    let moved =
        super::simulate::simulate_frozen(sys, y, &shifted, t_end, dt, seed, stream, Record::Terminal)?;
    Ok(base
        .terminal()
        .iter()
        .zip(moved.terminal())
        .map(|(a, b)| (b - a) / delta)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_engine::builtin::{lookup, toy, Rotating, SystemOverrides};

    #[test]
    fn linear_flow_is_exact_exponential() {
        let sys = toy();
        let flow =
            simulate_variational(&sys, &[0.0], &[1.5], 4.0, 0.01, 3, 0, FlowOrder::First, Record::Every(10))
                .unwrap();
        assert_eq!(flow.jac_x[0][(0, 0)], 1.0);
        for (t, j) in flow.base_path.times.iter().zip(&flow.jac_x) {
            assert!((j[(0, 0)] - (-t).exp()).abs() < 1e-12);
        }
        assert!(flow.jac_y.iter().all(|j| j[(0, 0)] == 0.0));
        assert!(flow.sup_jac_x_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn rotating_flow_matches_matrix_exponential() {
        let sys = lookup("rotating", &SystemOverrides::default()).unwrap();
        let a = Rotating { omega: 0.5 }.matrix();
        let flow = simulate_variational(
            &sys,
            &[0.0],
            &[1.0, -1.0],
            2.0,
            0.01,
            1,
            0,
            FlowOrder::First,
            Record::Terminal,
        )
        .unwrap();
        let exact = (a * 2.0).exp();
        assert!((flow.jac_x.last().unwrap() - exact).norm() < 1e-10);
    }

    #[test]
    fn second_order_requires_second_derivatives() {
        let sys = lookup("rotating", &SystemOverrides::default()).unwrap();
        let err = simulate_variational(&sys, &[0.0], &[0.0, 0.0], 1.0, 0.01, 1, 0, FlowOrder::Second, Record::Terminal);
        assert!(matches!(err, Err(Error::MissingDerivative { .. })));
    }

    #[test]
    fn drifted_toy_y_flow_closed_form() {
        // b = -x + c tanh y: ∇_y X_t = c sech²(y)(1 - e^{-t}), ∇²_y X_t = -2c sech²y tanh y (1 - e^{-t}).
        let sys = lookup("toy-drifted", &SystemOverrides::default()).unwrap();
        let y = 0.8;
        let flow = simulate_variational(&sys, &[y], &[0.3], 3.0, 1e-3, 1, 0, FlowOrder::Second, Record::Terminal)
            .unwrap();
        let s2 = 1.0 / y.cosh().powi(2);
        let decay = 1.0 - (-3.0f64).exp();
        let jy = flow.jac_y.last().unwrap()[(0, 0)];
        assert!((jy - 0.1 * s2 * decay).abs() < 1e-3 * 0.1 * s2);
        let hyy = flow.jac_yy.as_ref().unwrap().last().unwrap()[0][(0, 0)];
        let exact = -2.0 * 0.1 * s2 * y.tanh() * decay;
        assert!((hyy - exact).abs() < 1e-3 * exact.abs());
    }
}
