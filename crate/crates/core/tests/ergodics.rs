use stable_averaging::ergodics::{
    density_oracle, estimate_invariant, integrate, mixing_rate, push_forward, InvariantConfig,
    MixingConfig, TestFn,
};
use stable_averaging::quadrature;
use stable_averaging::sde_engine::builtin::{lookup, toy, SystemOverrides};
use stable_averaging::stats::{self, ks_statistic, ks_two_sample, ks_two_sample_critical};
use stable_averaging::Error;

fn sin0(x: &[f64]) -> f64 {
    x[0].sin()
}

#[test]
fn toy_invariant_matches_stationary_cdf() {
    let sys = toy();
    let cfg = InvariantConfig::for_system(&sys, 100_000);
    let m = estimate_invariant(&sys, &[0.0], &[0.0], &cfg, 11).unwrap();
    let rho = density_oracle(1.5).unwrap();
    let d = ks_statistic(&m.component(0), |x| rho.cdf_value(x));
    assert!(d < 0.02, "KS {d}");
}

#[test]
fn quantiles_at_alpha_1_8() {
    let sys = lookup(
        "toy",
        &SystemOverrides {
            alpha_fast: Some(1.8),
            r0: Some(0.3),
            ..Default::default()
        },
    )
    .unwrap();
    let cfg = InvariantConfig::for_system(&sys, 100_000).with_chains(8);
    let m = estimate_invariant(&sys, &[0.0], &[0.0], &cfg, 5).unwrap();
    let xs = stats::sorted(&m.component(0));
    let rho = density_oracle(1.8).unwrap();
    for p in [0.05, 0.1, 0.9, 0.95] {
        let q = rho.quantile(p).unwrap();
        let e = stats::quantile_sorted(&xs, p);
        assert!((e - q).abs() <= 0.02 * q.abs(), "p {p}: {e} vs {q}");
    }
}

#[test]
fn measure_does_not_depend_on_start() {
    let sys = toy();
    let mut cfg = InvariantConfig::for_system(&sys, 20_000).with_chains(4);
    // Thinning of 3/γ makes consecutive samples close to independent, as the
    // two-sample critical value assumes.
    cfg.thinning = 3.0;
    let ms: Vec<Vec<f64>> = [-5.0, 0.0, 5.0]
        .iter()
        .enumerate()
        .map(|(i, &x0)| {
            estimate_invariant(&sys, &[0.0], &[x0], &cfg, 100 + i as u64)
                .unwrap()
                .component(0)
        })
        .collect();
    let crit = ks_two_sample_critical(0.01, 20_000, 20_000);
    for i in 0..3 {
        for j in i + 1..3 {
            let d = ks_two_sample(&ms[i], &ms[j]);
            assert!(d < crit, "{i} {j}: {d} vs {crit}");
        }
    }
}

#[test]
fn integrals_against_stationary_measure() {
    let sys = toy();
    let cfg = InvariantConfig::for_system(&sys, 50_000).with_chains(4);
    let m = estimate_invariant(&sys, &[0.0], &[0.0], &cfg, 21).unwrap();
    let s = integrate(&m, sin0);
    assert!(s.within(0.0, 3.0), "{s:?}");
    let q = density_oracle(1.5).unwrap().quantile(0.95).unwrap();
    let tail = integrate(&m, |x| f64::from(u8::from(x[0].abs() > q)));
    assert!(tail.within(0.1, 3.0), "{tail:?}");
}

#[test]
fn stationary_under_push_forward() {
    let sys = toy();
    let cfg = InvariantConfig::for_system(&sys, 10_000).with_chains(4);
    let m = estimate_invariant(&sys, &[0.0], &[0.0], &cfg, 31).unwrap();
    let moved = push_forward(&m, &sys, &[0.0], 1.0, 0.01, 32).unwrap();
    let crit = ks_two_sample_critical(0.01, m.len(), moved.len());
    assert!(ks_two_sample(&m.component(0), &moved.component(0)) < crit);
}

#[test]
fn oracle_is_a_valid_law() {
    let rho = density_oracle(1.5).unwrap();
    let d = |x: f64| rho.density(x).unwrap().value;
    assert_eq!(d(1.3), d(-1.3));
    // Mass inside [-L, L] plus the closed-form power tails.
    let inner = quadrature::integrate(d, -200.0, 200.0, 1e-10).value;
    let tail = 2.0 * (1.0 - rho.cdf_value(200.0));
    assert!((inner + tail - 1.0).abs() < 1e-6);
    let mut last = 0.0;
    for i in -50..=50 {
        let f = rho.cdf_value(i as f64 * 0.5);
        assert!(f >= last);
        last = f;
    }
    assert!(rho.cdf_value(-1e6) < 1e-6 && rho.cdf_value(1e6) > 1.0 - 1e-6);
}

#[test]
fn mixing_rate_beats_quarter_gamma() {
    let sys = toy();
    let cfg = MixingConfig::new(&sys, 8.0, 10_000);
    let phi = TestFn {
        name: "sin".into(),
        f: &sin0,
    };
    let r = mixing_rate(&sys, &[0.0], &phi, &[3.0], Default::default(), &cfg, 41).unwrap();
    assert!(r.rate >= 0.25 * sys.gamma, "{r:?}");

    let twice = |x: &[f64]| 2.0 * x[0].sin();
    let phi2 = TestFn {
        name: "2 sin".into(),
        f: &twice,
    };
    let r2 = mixing_rate(&sys, &[0.0], &phi2, &[3.0], Default::default(), &cfg, 41).unwrap();
    assert!((r2.prefactor / r.prefactor - 2.0).abs() < 1e-9);
    assert!((r2.rate - r.rate).abs() < 1e-9);
}

#[test]
fn odd_test_function_from_center_has_no_signal() {
    let sys = toy();
    let cfg = MixingConfig::new(&sys, 4.0, 4000);
    let phi = TestFn {
        name: "sin".into(),
        f: &sin0,
    };
    let err = mixing_rate(&sys, &[0.0], &phi, &[0.0], Default::default(), &cfg, 42).unwrap_err();
    assert!(matches!(err, Error::SignalBelowNoise(_)));
}
