use stable_averaging::ergodics::{
    density_oracle, estimate_invariant, integrate, mixing_rate, InvariantConfig, MixingConfig, TestFn,
};
use stable_averaging::rng::RngStream;
use stable_averaging::sde_engine::par_paths;
use stable_averaging::stable_noise::sample_symmetric;
use stable_averaging::stats::{self, ks_statistic};
use statrs::function::gamma::gamma;

use super::{sin0, Ctx};
use crate::report::Report;

const CF_ALPHAS: [f64; 3] = [1.2, 1.5, 1.8];
const CF_FREQUENCIES: [f64; 3] = [0.5, 1.0, 2.0];

/// Budgets: `n_samples` draws per exponent (default 1e5). A configured
/// `alpha_fast` replaces the default exponent list.
pub fn stable_cf(ctx: &Ctx) -> anyhow::Result<Report> {
    let n = ctx.n_samples(100_000);
    let alphas: Vec<f64> = match ctx.cfg.system.alpha_fast {
        Some(a) => vec![a],
        None => CF_ALPHAS.to_vec(),
    };
    let tol = 5.0 / (n as f64).sqrt();
    // Per exponent: (re, im) of the empirical cf at each frequency.
    let ecf = par_paths(alphas.len(), |k| {
        let alpha = alphas[k as usize];
        let mut rng = RngStream::new(ctx.seed, k).generator();
        let mut sums = [(0.0, 0.0); CF_FREQUENCIES.len()];
        for _ in 0..n {
            let x = sample_symmetric(alpha, &mut rng);
            for (s, xi) in sums.iter_mut().zip(CF_FREQUENCIES) {
                s.0 += (xi * x).cos();
                s.1 += (xi * x).sin();
            }
        }
        Ok(sums.map(|(c, s)| (c / n as f64, s / n as f64)))
    })?;

    let mut r = ctx.report();
    for (alpha, cf) in alphas.iter().zip(&ecf) {
        let mut worst = 0.0f64;
        let mut c = r.claim(None, "empirical characteristic function of the unit stable draw");
        for (xi, (re, im)) in CF_FREQUENCIES.iter().zip(cf) {
            let target = (-xi.abs().powf(*alpha)).exp();
            c.info(format!("Re cf alpha={alpha} xi={xi}"), *re);
            c.info(format!("Im cf alpha={alpha} xi={xi}"), *im);
            worst = worst.max((re - target).hypot(*im));
        }
        r.claim(Some(1), "unit stable draws have characteristic function exp(-|xi|^alpha)")
            .at_most(format!("max cf error alpha={alpha}"), worst, tol);
    }
    r.conclude(1, "stable sampler fidelity", true);
    Ok(r)
}

/// Budgets: `n_samples` (default 1e5), `dt` of the chain.
pub fn invariant_ks(ctx: &Ctx) -> anyhow::Result<Report> {
    let sys = ctx.system_among(&["toy"])?;
    let alpha = sys.law_fast.alpha();
    let mut cfg = InvariantConfig::for_system(&sys, ctx.n_samples(100_000));
    cfg.dt = ctx.dt(cfg.dt);
    let m = estimate_invariant(&sys, &[0.0], &[0.0], &cfg, ctx.seed)?;
    let rho = density_oracle(alpha)?;
    let xs = m.component(0);
    let d = ks_statistic(&xs, |x| rho.cdf_value(x));

    let mut r = ctx.report();
    r.claim(
        Some(2),
        "long-run samples of dX = -X dt + dL follow the stationary stable density",
    )
    .at_most("KS distance", d, 0.02);
    // ρ(0) = (1/π) ∫_0^∞ exp(-s^α/α) ds in closed form.
    let closed = alpha.powf(1.0 / alpha) * gamma(1.0 + 1.0 / alpha) / std::f64::consts::PI;
    let at_zero = rho.density(0.0)?;
    r.claim(Some(2), "the stationary density at the origin").near(
        "density at 0",
        at_zero.value,
        closed,
        1e-6,
    );
    let sorted = stats::sorted(&xs);
    let mut c = r.claim(None, "empirical against exact stationary quantiles");
    for p in [0.05, 0.25, 0.75, 0.95] {
        c.info(format!("empirical quantile {p}"), stats::quantile_sorted(&sorted, p));
        c.info(format!("exact quantile {p}"), rho.quantile(p)?);
    }
    r.conclude(2, "stationary density of the frozen equation", true);
    Ok(r)
}

/// Budgets: `n_paths` per time point (default 1e4), `t_end` the fit
/// horizon (default 8/γ).
pub fn mixing(ctx: &Ctx) -> anyhow::Result<Report> {
    let sys = ctx.system()?;
    if sys.fast_dim() != 1 {
        anyhow::bail!("mixing uses a scalar test function and needs a one-dimensional fast space");
    }
    let y = vec![0.0; sys.slow_dim()];
    let measure = estimate_invariant(
        &sys,
        &y,
        &[0.0],
        &InvariantConfig::for_system(&sys, 20_000).with_chains(4),
        ctx.seed_for("reference"),
    )?;
    let reference = integrate(&measure, sin0);
    let phi = TestFn {
        name: "sin".into(),
        f: &sin0,
    };
    let cfg = MixingConfig::new(&sys, ctx.t_end(8.0 / sys.gamma), ctx.n_paths(10_000));

    let mut r = ctx.report();
    r.claim(None, "stationary mean of the test function")
        .info("mean of sin", reference.value)
        .info("mean of sin stderr", reference.stderr);
    for (k, x0) in [3.0, 1.5].into_iter().enumerate() {
        let fit = mixing_rate(&sys, &y, &phi, &[x0], reference, &cfg, ctx.seed_for(&format!("x0/{k}")))?;
        let mut c = r.claim(None, "decay fit of E sin(X_t) from a fixed start");
        c.info(format!("rate x0={x0}"), fit.rate)
            .info(format!("rate stderr x0={x0}"), fit.rate_stderr)
            .info(format!("prefactor x0={x0}"), fit.prefactor)
            .info(format!("prefactor over 1+sqrt|x0| x0={x0}"), fit.prefactor / (1.0 + x0.sqrt()))
            .info(format!("fit r2 x0={x0}"), fit.r2)
            .info(format!("window start x0={x0}"), fit.window.0)
            .info(format!("window end x0={x0}"), fit.window.1);
        if k == 0 {
            r.claim(
                Some(6),
                "E phi(X_t) approaches its stationary mean at least at rate gamma/4",
            )
            .at_least("fitted rate", fit.rate, 0.25 * sys.gamma);
        }
    }
    r.conclude(6, "mixing rate", true);
    Ok(r)
}
