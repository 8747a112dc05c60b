use stable_averaging::ergodics::{centering_check, estimate_invariant, InvariantConfig};
use stable_averaging::poisson_corrector::{
    bound_check, build_corrector, ou_sine_oracle, BoundFit, residual_check, CorrectorConfig,
};

use super::{calibrate_truncation, g_sup, Ctx};
use crate::report::Report;

/// Budgets: `n_paths` (default 1e4), `dt` (default 1e-3).
pub fn poisson_oracle(ctx: &Ctx) -> anyhow::Result<Report> {
    let sys = ctx.system_among(&["toy"])?;
    let alpha = sys.law_fast.alpha();
    let (mix, trunc) = calibrate_truncation(&sys, &[0.0], 1.0, 10_000, ctx.seed_for("truncation"))?;
    let cfg = CorrectorConfig {
        x_lo: -2.0,
        x_hi: 2.0,
        x_step: 1.0,
        n_paths: ctx.n_paths(10_000),
        dt: ctx.dt(1e-3),
        y_step: None,
    };
    let field = build_corrector(&sys, &[0.0], &[1.0], &trunc, 1.0, &cfg, ctx.seed)?;

    let mut r = ctx.report();
    r.claim(None, "time truncation of the Poisson integral")
        .info("fitted rate", mix.rate)
        .info("horizon", trunc.horizon);
    for (x, u) in field.xs.iter().zip(&field.values) {
        let exact = ou_sine_oracle(alpha, *x);
        r.claim(
            Some(7),
            "u(x) = integral over t of E sin(X^x_t) solves the Poisson equation for f = sin",
        )
        .near(format!("u(x={x})"), u.value, exact, (3.0 * u.stderr).max(1e-2));
        r.claim(None, "Monte Carlo error of u").info(format!("u stderr x={x}"), u.stderr);
    }
    r.conclude(7, "Poisson solution against quadrature", true);
    Ok(r)
}

fn residual_points() -> Vec<f64> {
    (0..=24).map(|i| -3.0 + 0.25 * i as f64).collect()
}

/// Budgets: `n_paths`, `dt`, `grid_step` of the finer ladder level
/// (defaults 1e4, 1e-3, 0.25). The coarse level uses a quarter of the
/// paths, four times the step and twice the grid spacing.
pub fn residual(ctx: &Ctx) -> anyhow::Result<Report> {
    let sys = ctx.system_among(&["toy"])?;
    let (_, trunc) = calibrate_truncation(&sys, &[0.0], 1.0, 10_000, ctx.seed_for("truncation"))?;
    let fine = CorrectorConfig {
        n_paths: ctx.n_paths(10_000),
        dt: ctx.dt(1e-3),
        x_step: ctx.grid_step(0.25),
        ..CorrectorConfig::default()
    };
    let coarse = CorrectorConfig {
        n_paths: (fine.n_paths / 4).max(1),
        dt: 4.0 * fine.dt,
        x_step: 2.0 * fine.x_step,
        ..fine
    };
    let points = residual_points();
    let mut r = ctx.report();
    let mut maxima = Vec::new();
    for (label, cfg) in [("coarse", coarse), ("default", fine)] {
        let field = build_corrector(&sys, &[0.0], &[1.0], &trunc, 1.0, &cfg, ctx.seed_for(label))?;
        let rep = residual_check(&field, &sys, &points)?;
        let mut c = r.claim(None, "pointwise generator residual L1 G~ + G");
        for p in &rep.points {
            c.info(format!("residual {label} x={}", p.x), p.residual);
        }
        maxima.push(rep.max_residual);
        r.claim(None, "ladder level budget")
            .info(format!("paths {label}"), cfg.n_paths as f64)
            .info(format!("dt {label}"), cfg.dt)
            .info(format!("grid step {label}"), cfg.x_step);
    }
    r.claim(None, "max residual on the coarse level").info("max residual coarse", maxima[0]);
    r.claim(Some(8), "the Monte Carlo corrector solves L1 G~ = -G on [-3, 3]")
        .at_most("max residual default", maxima[1], 5e-2);
    r.claim(Some(8), "the residual shrinks under refinement")
        .at_most("residual ratio default/coarse", maxima[1] / maxima[0], 1.0);
    r.conclude(8, "generator residual of the corrector", true);
    Ok(r)
}

/// The toy corpus: `(system, y)` pairs with an exactly centered `G`.
const CORPUS: [(&str, f64); 3] = [("toy", 0.0), ("toy-drifted", -1.0), ("toy-drifted", 0.5)];

/// Budgets: `n_paths` (default 4000), `dt` (default 2e-3), `grid_step`
/// (default 0.25) on `[-5, 5]`.
pub fn bounds(ctx: &Ctx) -> anyhow::Result<Report> {
    let mut r = ctx.report();
    for (k, (name, y)) in [CORPUS[0], CORPUS[2]].into_iter().enumerate() {
        let sys = ctx.named(name)?;
        let sup = g_sup(&sys, &[y]);
        let seed = ctx.seed_for(&format!("corpus/{k}"));
        let (_, trunc) = calibrate_truncation(&sys, &[y], sup, 10_000, seed)?;
        let cfg = CorrectorConfig {
            n_paths: ctx.n_paths(4000),
            dt: ctx.dt(2e-3),
            x_step: ctx.grid_step(0.25),
            ..CorrectorConfig::default()
        };
        let field = build_corrector(&sys, &[y], &[1.0], &trunc, sup, &cfg, seed)?;
        let b = bound_check(&field);
        let tag = format!("{name} y={y}");
        let grad = b.grad_x.unwrap_or(BoundFit {
            constant: f64::NAN,
            outliers: usize::MAX,
        });
        r.claim(None, "fitted growth constants of the corrector")
            .info(format!("C for |G~| {tag}"), b.value.constant)
            .info(format!("C for |grad_x G~| {tag}"), grad.constant)
            .info(format!("C for |u| {tag}"), b.growth.constant)
            .info(format!("edge outliers {tag}"), (b.value.outliers + grad.outliers) as f64);
        r.claim(
            Some(9),
            "|G~| <= C(1 + |x|^(1/2)) and |grad_x G~| <= C with finite C",
        )
        .check(format!("bounds hold {tag}"), b.passed);
    }
    r.conclude(9, "corrector growth bounds", true);
    Ok(r)
}

/// Budgets: `n_samples` of each invariant measure (default 5e4), `n_paths`
/// (default 2000) and `dt` (default 2e-3) of the corrector on `[-10, 10]`.
pub fn centering(ctx: &Ctx) -> anyhow::Result<Report> {
    let mut r = ctx.report();
    for (k, (name, y)) in CORPUS.into_iter().enumerate() {
        let sys = ctx.named(name)?;
        let seed = ctx.seed_for(&format!("corpus/{k}"));
        let mcfg = InvariantConfig::for_system(&sys, ctx.n_samples(50_000)).with_chains(4);
        let measure = estimate_invariant(&sys, &[y], &[0.0], &mcfg, seed)?;
        let g = centering_check(&sys, &measure, 3.0);
        let tag = format!("{name} y={y}");
        let mean_g = g.components[0];
        r.claim(Some(10), "G is centered under the frozen invariant measure")
            .at_most(format!("|mean of G| {tag}"), mean_g.value.abs(), 3.0 * mean_g.stderr);

        let sup = g_sup(&sys, &[y]);
        let (_, trunc) = calibrate_truncation(&sys, &[y], sup, 10_000, seed)?;
        let cfg = CorrectorConfig {
            x_lo: -10.0,
            x_hi: 10.0,
            x_step: 0.5,
            n_paths: ctx.n_paths(2000),
            dt: ctx.dt(2e-3),
            y_step: None,
        };
        let field = build_corrector(&sys, &[y], &[1.0], &trunc, sup, &cfg, seed)?;
        let u = field.integrate_against(&measure);
        r.claim(Some(10), "the corrector u is centered under the frozen invariant measure")
            .at_most(format!("|mean of u| {tag}"), u.value.abs(), 3.0 * u.stderr);
        r.claim(None, "raw centering estimates")
            .info(format!("mean of G {tag}"), mean_g.value)
            .info(format!("mean of u {tag}"), u.value);
    }
    r.conclude(10, "centering", true);
    Ok(r)
}
