use std::sync::Arc;
use std::time::Instant;

use stable_averaging::ergodics::{
    estimate_invariant, mixing_rate, InvariantConfig, MixingConfig, MixingReport, TestFn,
};
use stable_averaging::poisson_corrector::{
    bound_check, build_corrector, poisson_solve, residual_check, CorrectorConfig, PoissonProblem,
    Truncation,
};
use stable_averaging::sde_engine::builtin::{lookup, toy, SystemOverrides};
use stable_averaging::sde_engine::MultiscaleSystem;
use stable_averaging::stats::Estimate;
use stable_averaging::Error;

fn sin0(x: &[f64]) -> f64 {
    x[0].sin()
}

/// Composite Simpson in `s` on [0, 40] for
/// `∫ sin(x e^{-s}) exp(-(1 - e^{-αs})/α) ds`.
fn oracle(alpha: f64, x: f64) -> f64 {
    let n = 40_000;
    let h = 40.0 / n as f64;
    let f = |s: f64| (x * (-s).exp()).sin() * (-(1.0 - (-alpha * s).exp()) / alpha).exp();
    let mut acc = f(0.0) + f(40.0);
    for i in 1..n {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn toy_mixing(sys: &MultiscaleSystem) -> MixingReport {
    let phi = TestFn {
        name: "sin".into(),
        f: &sin0,
    };
    mixing_rate(
        sys,
        &[0.0],
        &phi,
        &[3.0],
        Estimate::default(),
        &MixingConfig::new(sys, 8.0, 10_000),
        7,
    )
    .unwrap()
}

fn toy_truncation(sys: &MultiscaleSystem) -> Truncation {
    Truncation::from_mixing(Some(&toy_mixing(sys)), 1.0, 3.0, 1.0, 1e-3).unwrap()
}

fn sine_problem(sys: &MultiscaleSystem) -> PoissonProblem {
    let cfg = InvariantConfig::for_system(sys, 20_000).with_chains(4);
    let m = estimate_invariant(sys, &[0.0], &[0.0], &cfg, 3).unwrap();
    PoissonProblem::new(sys, &[0.0], Arc::new(sin0), &m, 0.05).unwrap()
}

#[test]
fn matches_sine_oracle() {
    let sys = toy();
    let trunc = toy_truncation(&sys);
    let prob = sine_problem(&sys);
    for x in [0.0, 1.0, -1.0, 2.0, -2.0] {
        let u = poisson_solve(&prob, x, &trunc, 1.0, 10_000, 1e-3, 9).unwrap();
        let exact = oracle(1.5, x);
        let tol = (3.0 * u.stderr).max(1e-2);
        assert!((u.value - exact).abs() <= tol, "x {x}: {u:?} vs {exact}");
    }
}

#[test]
fn zero_rhs_gives_zero() {
    let sys = toy();
    let trunc = toy_truncation(&sys);
    let cfg = InvariantConfig::for_system(&sys, 1000);
    let m = estimate_invariant(&sys, &[0.0], &[0.0], &cfg, 3).unwrap();
    let prob = PoissonProblem::new(&sys, &[0.0], Arc::new(|_| 0.0), &m, 1e-12).unwrap();
    let u = poisson_solve(&prob, 1.3, &trunc, 0.0, 100, 1e-2, 1).unwrap();
    assert_eq!(u.value, 0.0);
}

#[test]
fn uncentered_rhs_is_rejected() {
    let sys = toy();
    let cfg = InvariantConfig::for_system(&sys, 5000);
    let m = estimate_invariant(&sys, &[0.0], &[0.0], &cfg, 3).unwrap();
    let err = PoissonProblem::new(&sys, &[0.0], Arc::new(|x: &[f64]| x[0].cos()), &m, 0.05);
    assert!(matches!(err, Err(Error::NotCentered { .. })));
}

#[test]
fn linear_in_the_rhs_and_odd_at_origin() {
    let sys = toy();
    let trunc = toy_truncation(&sys);
    let cfg = InvariantConfig::for_system(&sys, 20_000).with_chains(4);
    let m = estimate_invariant(&sys, &[0.0], &[0.0], &cfg, 3).unwrap();
    let odd3 = |x: &[f64]| (x[0] / (1.0 + x[0] * x[0])).powi(3);
    let solve = |f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>, x: f64| {
        let p = PoissonProblem::new(&sys, &[0.0], f, &m, 0.05).unwrap();
        poisson_solve(&p, x, &trunc, 1.0, 2000, 2e-3, 17).unwrap()
    };
    let a = solve(Arc::new(sin0), 0.7);
    let b = solve(Arc::new(odd3), 0.7);
    let ab = solve(Arc::new(move |x: &[f64]| 2.0 * x[0].sin() - 3.0 * odd3(x)), 0.7);
    assert!((ab.value - (2.0 * a.value - 3.0 * b.value)).abs() < 1e-10);

    let z = solve(Arc::new(sin0), 0.0);
    assert!(z.within(0.0, 3.0), "{z:?}");
}

#[test]
fn doubling_the_horizon_stays_inside_tail_bound() {
    let sys = toy();
    let trunc = toy_truncation(&sys);
    let prob = sine_problem(&sys);
    let a = poisson_solve(&prob, 1.0, &trunc, 1.0, 4000, 2e-3, 5).unwrap();
    let long = trunc.with_horizon(2.0 * trunc.horizon);
    let b = poisson_solve(&prob, 1.0, &long, 1.0, 4000, 2e-3, 5).unwrap();
    // Same seed: the difference is the integral over [T, 2T] plus its own noise.
    let diff = (a.value - b.value).abs();
    assert!(diff <= trunc.tail_bound(1.0, 1.0) + 3.0 * b.stderr, "{diff}");
}

#[test]
fn toy_corrector_residual_bounds_and_centering() {
    let sys = toy();
    let trunc = toy_truncation(&sys);
    let start = Instant::now();
    let field = build_corrector(&sys, &[0.0], &[1.0], &trunc, 1.0, &CorrectorConfig::default(), 23)
        .unwrap();
    eprintln!("corrector built in {:?}", start.elapsed());

    for (x, u) in field.xs.iter().zip(&field.values) {
        if x.abs() <= 2.0 + 1e-9 && (x.fract() == 0.0) {
            let exact = oracle(1.5, *x);
            assert!((u.value - exact).abs() <= (3.0 * u.stderr).max(1e-2), "{x}");
        }
    }

    let points: Vec<f64> = (0..=24).map(|i| -3.0 + 0.25 * i as f64).collect();
    let r = residual_check(&field, &sys, &points).unwrap();
    assert!(r.max_residual <= 5e-2, "{}", r.max_residual);

    let b = bound_check(&field);
    assert!(b.passed, "{b:?}");

    let cfg = InvariantConfig::for_system(&sys, 20_000).with_chains(4);
    let m = estimate_invariant(&sys, &[0.0], &[0.0], &cfg, 77).unwrap();
    let c = field.integrate_against(&m);
    assert!(c.within(0.0, 3.0), "{c:?}");

    // Linearity in the slow gradient is exact.
    let twice = build_corrector(
        &sys,
        &[0.0],
        &[2.0],
        &trunc,
        1.0,
        &CorrectorConfig {
            n_paths: 200,
            ..Default::default()
        },
        23,
    )
    .unwrap();
    let once = build_corrector(
        &sys,
        &[0.0],
        &[1.0],
        &trunc,
        1.0,
        &CorrectorConfig {
            n_paths: 200,
            ..Default::default()
        },
        23,
    )
    .unwrap();
    for (a, b) in twice.values.iter().zip(&once.values) {
        assert_eq!(a.value, 2.0 * b.value);
    }
    let zero = build_corrector(
        &sys,
        &[0.0],
        &[0.0],
        &trunc,
        1.0,
        &CorrectorConfig {
            n_paths: 200,
            ..Default::default()
        },
        23,
    )
    .unwrap();
    assert!(zero.values.iter().all(|e| e.value == 0.0));
}

#[test]
fn drifted_toy_y_derivatives() {
    // The frozen law at y is the toy law shifted by c·tanh(y), so
    // G̃(x, y) = oracle(x - s) - m(y)·T-part; check ∂_y against a finite
    // difference of the exact solution.
    let sys = lookup("toy-drifted", &SystemOverrides::default()).unwrap();
    let trunc = toy_truncation(&toy());
    let y = 0.5;
    let cfg = CorrectorConfig {
        x_lo: -1.0,
        x_hi: 1.0,
        x_step: 0.5,
        n_paths: 4000,
        dt: 2e-3,
        y_step: Some(0.05),
    };
    let field = build_corrector(&sys, &[y], &[1.0], &trunc, 2.0, &cfg, 5).unwrap();
    let gy = field.grad_y.as_ref().unwrap();
    let c = 0.1;
    let alpha = 1.5;
    // With s = c tanh y, X - s is a toy path from x - s, and
    // G = sin(X) - sin(s) e^{-1/α}; E sin(X_t) = Im E e^{i(X_t - s)} e^{is}.
    let exact = |x: f64, y: f64| {
        let s = c * y.tanh();
        let n = 40_000;
        let t_end = 40.0;
        let h = t_end / n as f64;
        let f = |t: f64| {
            let z = (x - s) * (-t).exp();
            let damp = (-(1.0 - (-alpha * t).exp()) / alpha).exp();
            (z + s).sin() * damp - s.sin() * (-1.0 / alpha).exp()
        };
        let mut acc = f(0.0) + f(t_end);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    for (k, x) in field.xs.iter().enumerate() {
        let d = (exact(*x, y + 1e-4) - exact(*x, y - 1e-4)) / 2e-4;
        let e = gy[k][0];
        assert!((e.value - d).abs() <= (4.0 * e.stderr).max(2e-2), "x {x}: {e:?} vs {d}");
    }
    assert!(field.hess_y.is_some());
}
