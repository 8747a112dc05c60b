use stable_averaging::averaging_lab::{
    averaged_ensemble, build_averaged, martingale_residual, simulate_averaged, weak_convergence_test,
    AveragedDrift, AveragedSystem, Bump, ConstantPair, GeneratorTable, PastFunctional,
    WeakConvergenceConfig,
};
use stable_averaging::ergodics::{density_oracle, InvariantConfig};
use stable_averaging::sde_engine::builtin::{lookup, toy, SystemOverrides};
use stable_averaging::sde_engine::Record;
use stable_averaging::stable_noise::{cdf_1d, StableLaw};
use stable_averaging::stats::{self, ks_one_sample_critical, ks_pvalue, ks_statistic, normal_cdf, Estimate};

fn zero_avg() -> AveragedSystem {
    build_averaged(&toy(), &[0.0, 1.0], &[0.0], &InvariantConfig::for_system(&toy(), 10), 0).unwrap()
}

#[test]
fn toy_and_linear_drifts_average_to_zero() {
    assert_eq!(zero_avg().drift, AveragedDrift::Zero);

    let sys = lookup("toy-linear-f", &SystemOverrides::default()).unwrap();
    let cfg = InvariantConfig::for_system(&sys, 20_000).with_chains(4);
    let avg = build_averaged(&sys, &[-2.0, 0.0, 2.0], &[0.0], &cfg, 3).unwrap();
    let AveragedDrift::Tabulated { values, .. } = &avg.drift else {
        panic!("expected a tabulated drift");
    };
    for v in values {
        assert!(v.within(0.0, 3.0), "{v:?}");
    }
}

#[test]
fn truncated_square_matches_density_quadrature() {
    let sys = lookup("toy-truncated-square", &SystemOverrides::default()).unwrap();
    let cfg = InvariantConfig::for_system(&sys, 50_000).with_chains(4);
    let avg = build_averaged(&sys, &[-1.0, 1.0], &[0.0], &cfg, 8).unwrap();
    // E[min(x², 4)] = ∫_{-2}^{2} x² ρ + 4 P(|X| > 2), by Simpson on the oracle density.
    let rho = density_oracle(1.5).unwrap();
    let n = 2000;
    let h = 4.0 / n as f64;
    let f = |x: f64| x * x * rho.density(x).unwrap().value;
    let mut acc = f(-2.0) + f(2.0);
    for i in 1..n {
        acc += f(-2.0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let exact = acc * h / 3.0 + 4.0 * 2.0 * (1.0 - rho.cdf_value(2.0));
    let AveragedDrift::Tabulated { values, .. } = &avg.drift else {
        panic!("expected a tabulated drift");
    };
    for v in values {
        assert!(v.within(exact, 3.0), "{v:?} vs {exact}");
    }
}

#[test]
fn pure_noise_limit_is_the_stable_law() {
    let avg = zero_avg();
    let ys: Vec<f64> = (0..10_000)
        .map(|i| simulate_averaged(&avg, &[0.0], 1.0, 0.01, 4, i, Record::Terminal).unwrap().terminal()[0])
        .collect();
    let law = StableLaw::new(1.5, 1).unwrap();
    let d = ks_statistic(&ys, |x| cdf_1d(&law, x).unwrap());
    assert!(d < ks_one_sample_critical(0.01, ys.len()), "{d}");
}

#[test]
fn noiseless_path_follows_the_interpolated_ode() {
    let avg = AveragedSystem {
        system: "ode".into(),
        drift: AveragedDrift::Tabulated {
            nodes: vec![-1.0, 0.0, 0.5, 2.0],
            values: [1.0, 0.5, -0.25, -1.0].iter().map(|v| Estimate::new(*v, 0.0)).collect(),
        },
        law_slow: StableLaw::new(1.5, 1).unwrap(),
        noise: false,
    };
    let p = simulate_averaged(&avg, &[-0.8], 3.0, 1e-4, 0, 0, Record::Terminal).unwrap();
    // RK4 with a much finer step on the same interpolant.
    let f = |y: f64| {
        let mut o = [0.0];
        avg.fbar(&[y], &mut o).unwrap();
        o[0]
    };
    let (mut y, h) = (-0.8f64, 1e-6);
    for _ in 0..3_000_000 {
        let k1 = f(y);
        let k2 = f(y + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h * k2);
        let k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    assert!((p.terminal()[0] - y).abs() < 1e-3, "{} vs {y}", p.terminal()[0]);
}

#[test]
fn dynkin_identity_for_the_averaged_process() {
    let avg = zero_avg();
    let bump = Bump {
        center: 0.0,
        width: 2.0,
    };
    let table = GeneratorTable::new(&avg, bump, 8.0, 0.02).unwrap();
    let paths = averaged_ensemble(&avg, &[0.0], 1.0, 1e-3, 0.01, 20_000, 12).unwrap();
    let r = martingale_residual(&paths, &table, 0.25, 1.0, PastFunctional::One).unwrap();
    assert!(r.within(0.0, 3.0), "{r:?}");

    let c = martingale_residual(&paths, &ConstantPair(3.0), 0.25, 1.0, PastFunctional::Sigmoid).unwrap();
    assert_eq!(c.value, 0.0);
}

#[test]
fn residual_z_scores_look_standard_normal() {
    let avg = zero_avg();
    let mut zs = Vec::new();
    for k in 0..20u64 {
        let bump = Bump {
            center: -1.0 + 0.1 * k as f64,
            width: 1.5 + 0.05 * k as f64,
        };
        let table = GeneratorTable::new(&avg, bump, 8.0, 0.02).unwrap();
        let t0 = 0.05 + 0.1 * (k % 5) as f64;
        let past = [PastFunctional::One, PastFunctional::Sigmoid, PastFunctional::PathAverage][k as usize % 3];
        let paths = averaged_ensemble(&avg, &[0.0], 1.0, 1e-3, 0.01, 4000, 100 + k).unwrap();
        let r = martingale_residual(&paths, &table, t0, 1.0, past).unwrap();
        zs.push(r.value / r.stderr);
    }
    let d = ks_statistic(&zs, normal_cdf);
    assert!(ks_pvalue(d, zs.len()) > 0.01, "z-scores {zs:?}");
    assert!(stats::mean(&zs).abs() < 3.0 / (20f64).sqrt());
}

#[test]
fn no_multiscale_effect_means_null_distances() {
    let sys = lookup("pure-noise", &SystemOverrides::default()).unwrap();
    let avg = build_averaged(&sys, &[0.0, 1.0], &[0.0], &InvariantConfig::for_system(&sys, 10), 0).unwrap();
    let cfg = WeakConvergenceConfig {
        n_paths: 4000,
        bootstrap: 50,
        permutations: 50,
        ..Default::default()
    };
    let r = weak_convergence_test(&sys, &avg, &[0.0], &[0.0], &[0.3, 0.2], &cfg, 5).unwrap();
    for rung in &r.rungs {
        assert!(rung.ks < r.ks_critical, "{rung:?}");
    }
    assert!(r.verdict);
}
