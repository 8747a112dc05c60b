use stable_averaging::averaging_lab::{
    averaged_ensemble, build_averaged, martingale_residual, slow_ensemble, truncated_square_mean,
    weak_convergence_test, AveragedDrift, AveragedSystem, Bump, GeneratorTable, PastFunctional,
    WeakConvergenceConfig,
};
use stable_averaging::ergodics::{centering_check, density_oracle, estimate_invariant, InvariantConfig};
use stable_averaging::sde_engine::MultiscaleSystem;

use super::Ctx;
use crate::report::{Claim, Report};

/// Nodes of a tabulated averaged drift for systems where `F` does not vanish.
fn drift_nodes() -> Vec<f64> {
    (0..=20).map(|i| -10.0 + i as f64).collect()
}

fn averaged_for(ctx: &Ctx, sys: &MultiscaleSystem, n_samples: usize) -> anyhow::Result<AveragedSystem> {
    let cfg = InvariantConfig::for_system(sys, n_samples).with_chains(4);
    let x0 = vec![0.0; sys.fast_dim()];
    Ok(build_averaged(sys, &drift_nodes(), &x0, &cfg, ctx.seed_for("averaged"))?)
}

fn drift_rows(c: &mut Claim<'_>, label: &str, avg: &AveragedSystem) {
    if let AveragedDrift::Tabulated { nodes, values } = &avg.drift {
        for (y, v) in nodes.iter().zip(values) {
            c.info(format!("{label} Fbar(y={y})"), v.value)
                .info(format!("{label} Fbar stderr y={y}"), v.stderr);
        }
    }
}

/// Budgets: `n_samples` per drift node (default 2e4).
pub fn averaged_drift(ctx: &Ctx) -> anyhow::Result<Report> {
    let n = ctx.n_samples(20_000);
    let mut r = ctx.report();

    let toy = ctx.named("toy")?;
    let avg = build_averaged(&toy, &[-1.0, 1.0], &[0.0], &InvariantConfig::for_system(&toy, n), 0)?;
    r.claim(Some(11), "with F = 0 the averaged drift vanishes identically")
        .check("Fbar identically zero for the toy", avg.drift == AveragedDrift::Zero);

    let linear = ctx.named("toy-linear-f")?;
    let cfg = InvariantConfig::for_system(&linear, n).with_chains(4);
    let avg = build_averaged(&linear, &[-2.0, 0.0, 2.0], &[0.0], &cfg, ctx.seed_for("linear"))?;
    let AveragedDrift::Tabulated { nodes, values } = &avg.drift else {
        anyhow::bail!("F = x must give a tabulated averaged drift");
    };
    for (y, v) in nodes.iter().zip(values) {
        r.claim(
            Some(11),
            "with F(x) = x the averaged drift is the stationary mean, which is zero",
        )
        .at_most(format!("|Fbar(y={y})| for F = x"), v.value.abs(), 3.0 * v.stderr);
    }

    let square = ctx.named("toy-truncated-square")?;
    let cfg = InvariantConfig::for_system(&square, n).with_chains(4);
    let avg = build_averaged(&square, &[-1.0, 1.0], &[0.0], &cfg, ctx.seed_for("square"))?;
    let exact = truncated_square_mean(&density_oracle(square.law_fast.alpha())?, 4.0)?;
    let mut c = r.claim(None, "with F = min(x^2, 4) the averaged drift is its stationary mean");
    c.info("quadrature E min(X^2, 4)", exact.value);
    drift_rows(&mut c, "truncated square", &avg);
    r.conclude(11, "averaged drift", true);
    Ok(r)
}

const LADDER: [f64; 3] = [0.3, 0.2, 0.1];

fn weak_config(ctx: &Ctx) -> WeakConvergenceConfig {
    let d = WeakConvergenceConfig::default();
    WeakConvergenceConfig {
        n_paths: ctx.n_paths(d.n_paths),
        t_end: ctx.t_end(d.t_end),
        averaged_dt: ctx.dt(d.averaged_dt),
        ..d
    }
}

fn ladder_rows(r: &mut Report, criterion: Option<u32>, ladder: &[f64], wc: &WeakConvergenceConfig, ctx: &Ctx, sys: &MultiscaleSystem, avg: &AveragedSystem) -> anyhow::Result<bool> {
    let x0 = vec![0.0; sys.fast_dim()];
    let y0 = vec![0.0; sys.slow_dim()];
    let rep = weak_convergence_test(sys, avg, &x0, &y0, ladder, wc, ctx.seed_for("ladder"))?;
    let mut c = r.claim(None, "distance between the slow component at T and the averaged limit");
    for rung in &rep.rungs {
        let e = rung.eps;
        c.info(format!("KS eps={e}"), rung.ks)
            .info(format!("KS band eps={e}"), rung.ks_band)
            .info(format!("W eps={e}"), rung.wasserstein)
            .info(format!("W band eps={e}"), rung.wasserstein_band)
            .info(format!("escaped fraction eps={e}"), rung.escaped_fraction);
    }
    c.info("W order", rep.wasserstein_order)
        .info("W critical", rep.wasserstein_critical)
        .info("W trend ok", f64::from(u8::from(rep.wasserstein_trend_ok)))
        .info("W null ok", f64::from(u8::from(rep.wasserstein_null_ok)));
    let last = rep.rungs.last().expect("nonempty ladder");
    r.claim(criterion, "the KS distance does not grow as eps decreases (bootstrap band)")
        .check("KS non-increasing", rep.ks_trend_ok);
    r.claim(
        criterion,
        "at the smallest eps the KS distance is below the two-sample critical value at level 0.01",
    )
    .at_most(format!("KS at eps={}", last.eps), last.ks, rep.ks_critical);
    Ok(rep.ks_trend_ok && rep.ks_null_ok)
}

/// Budgets: `n_paths` per side (default 2e4), `t_end` (default 1), `dt` of
/// the averaged equation (default 1e-3).
pub fn weak_convergence(ctx: &Ctx) -> anyhow::Result<Report> {
    let sys = ctx.system()?;
    let avg = averaged_for(ctx, &sys, 20_000)?;
    let wc = weak_config(ctx);
    let mut r = ctx.report();
    ladder_rows(&mut r, Some(12), &LADDER, &wc, ctx, &sys, &avg)?;
    r.conclude(12, "weak convergence to the averaged process", true);
    Ok(r)
}

/// Budgets: `n_paths` of the averaged process (default 2e4; the slow
/// component at eps = 0.1 uses half), `dt` of the averaged equation.
pub fn martingale(ctx: &Ctx) -> anyhow::Result<Report> {
    let sys = ctx.system()?;
    let avg = averaged_for(ctx, &sys, 20_000)?;
    let n = ctx.n_paths(20_000);
    let (t0, t) = (0.25, 1.0);
    let bump = Bump {
        center: 0.0,
        width: 2.0,
    };
    let table = GeneratorTable::new(&avg, bump, 8.0, 0.02)?;
    let y0 = vec![0.0; sys.slow_dim()];
    let paths = averaged_ensemble(&avg, &y0, t, ctx.dt(1e-3), 0.01, n, ctx.seed_for("averaged-paths"))?;

    let mut r = ctx.report();
    for (name, past) in [
        ("one", PastFunctional::One),
        ("sigmoid", PastFunctional::Sigmoid),
        ("path average", PastFunctional::PathAverage),
    ] {
        let e = martingale_residual(&paths, &table, t0, t, past)?;
        r.claim(
            Some(13),
            "the averaged process solves the martingale problem of its generator",
        )
        .at_most(format!("|residual| averaged past={name}"), e.value.abs(), 3.0 * e.stderr);
        r.claim(None, "signed residual").info(format!("residual averaged past={name}"), e.value);
    }

    let slow = sys.clone().with_eps(0.1)?;
    let x0 = vec![0.0; sys.fast_dim()];
    let paths = slow_ensemble(&slow, &x0, &y0, t, 0.01, (n / 2).max(2), ctx.seed_for("slow-paths"))?;
    let e = martingale_residual(&paths, &table, t0, t, PastFunctional::One)?;
    r.claim(
        Some(13),
        "the slow component at eps = 0.1 nearly solves the averaged martingale problem",
    )
    .at_most("|residual| slow eps=0.1", e.value.abs(), (3.0 * e.stderr).max(0.05));
    r.claim(None, "signed residual")
        .info("residual slow eps=0.1", e.value)
        .info("residual stderr slow eps=0.1", e.stderr);
    r.conclude(13, "martingale residual", true);
    Ok(r)
}

/// The full pipeline for the configured system: centering of `G` at the
/// slow start, the averaged drift, and a three-rung ladder ending at the
/// configured eps. Budgets as for `weak-convergence`, plus `n_samples`.
pub fn custom(ctx: &Ctx) -> anyhow::Result<Report> {
    let sys = ctx.system()?;
    let mut r = ctx.report();
    let y0 = vec![0.0; sys.slow_dim()];
    let x0 = vec![0.0; sys.fast_dim()];
    let n = ctx.n_samples(20_000);
    let measure = estimate_invariant(
        &sys,
        &y0,
        &x0,
        &InvariantConfig::for_system(&sys, n).with_chains(4),
        ctx.seed_for("centering"),
    )?;
    let centering = centering_check(&sys, &measure, 3.0);
    let mut c = r.claim(None, "G is centered at the slow start");
    for (j, e) in centering.components.iter().enumerate() {
        c.info(format!("mean of G_{j}"), e.value).info(format!("mean of G_{j} stderr"), e.stderr);
    }
    let avg = averaged_for(ctx, &sys, n)?;
    drift_rows(&mut r.claim(None, "averaged drift"), "averaged", &avg);
    let ladder = [4.0 * sys.eps, 2.0 * sys.eps, sys.eps];
    let ok = ladder_rows(&mut r, None, &ladder, &weak_config(ctx), ctx, &sys, &avg)?;
    r.claim(None, "overall verdict").check("centering", centering.passed).check("ladder", ok);
    r.conclude(0, "custom pipeline", centering.passed && ok);
    Ok(r)
}
