use stable_averaging::rng::RngStream;
use stable_averaging::sde_engine::{
    fast_sup_moment, finite_difference_x, frozen_sup_moment, par_paths, simulate_variational, step_count,
    FlowOrder, FrozenStepper, Record,
};
use stable_averaging::stats::fit_line;

use super::Ctx;
use crate::report::Report;

/// Budgets: `n_paths` coupled pairs (default 1000), `dt` (default 0.01),
/// `t_end` (default 5).
pub fn contraction(ctx: &Ctx) -> anyhow::Result<Report> {
    let sys = ctx.system()?;
    let exact = sys.name() == "toy";
    let (n_paths, dt, t_end) = (ctx.n_paths(1000), ctx.dt(0.01), ctx.t_end(5.0));
    let steps = step_count(t_end, dt)?;
    let h = t_end / steps as f64;
    let every = ((0.1 / h).round() as usize).max(1);
    let y = vec![0.0; sys.slow_dim()];
    let n = sys.fast_dim();

    // Per pair: worst relative deviation from exp(-γt) (toy) or worst
    // ratio to that bound (other systems).
    let worst = par_paths(n_paths, |i| {
        let mut stepper = FrozenStepper::new(&sys, &y, h)?;
        let mut rng = RngStream::new(ctx.seed, i).generator();
        let start = -4.0 + 8.0 * ((i * 7) % 17) as f64 / 16.0;
        let mut a = vec![start; n];
        let mut b: Vec<f64> = (0..n).map(|k| start + 0.5 + ((i as usize + k) % 5) as f64).collect();
        let gap0 = dist(&a, &b);
        let mut noise = vec![0.0; n];
        let mut worst = 0.0f64;
        for k in 1..=steps {
            stepper.draw(&mut rng, &mut noise);
            stepper.advance(&mut a, &noise);
            stepper.advance(&mut b, &noise);
            if k % every == 0 || k == steps {
                let t = k as f64 * h;
                let ratio = dist(&a, &b) / gap0 / (-sys.gamma * t).exp();
                worst = worst.max(if exact { (ratio - 1.0).abs() } else { ratio - 1.0 });
            }
        }
        Ok(worst)
    })?;
    let worst = worst.into_iter().fold(f64::NEG_INFINITY, f64::max);

    let mut r = ctx.report();
    r.claim(None, "coupling setup").info("step", h).info("pairs", n_paths as f64);
    if exact {
        r.claim(
            Some(3),
            "synchronously coupled paths of dX = -X dt + dL keep |X1 - X2| = exp(-t)|x1 - x2|",
        )
        .at_most("max relative error", worst, 10.0 * h);
    } else {
        r.claim(
            Some(3),
            "synchronously coupled paths satisfy |X1 - X2| <= exp(-gamma t)|x1 - x2|",
        )
        .at_most("max excess over the contraction bound", worst, 10.0 * h);
    }
    r.conclude(3, "contraction under synchronous coupling", true);
    Ok(r)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

/// Budgets: `n_paths` (default 100 per system), `dt` (default 1e-3),
/// `t_end` (default 2).
pub fn variational(ctx: &Ctx) -> anyhow::Result<Report> {
    let toy = ctx.named("toy")?;
    let nonlinear = ctx.named("nonlinear")?;
    let (n_paths, dt, t_end) = (ctx.n_paths(100), ctx.dt(1e-3), ctx.t_end(2.0));
    let stride = ((0.1 / dt).round() as usize).max(1);

    let exact_err = par_paths(n_paths, |i| {
        let flow = simulate_variational(
            &toy,
            &[0.0],
            &[1.5],
            t_end,
            dt,
            ctx.seed_for("toy"),
            i,
            FlowOrder::First,
            Record::Every(stride),
        )?;
        Ok(flow
            .base_path
            .times
            .iter()
            .zip(&flow.jac_x)
            .map(|(t, j)| (j[(0, 0)] * t.exp() - 1.0).abs())
            .fold(0.0, f64::max))
    })?;
    let exact_err = exact_err.into_iter().fold(0.0, f64::max);

    let seed = ctx.seed_for("nonlinear");
    let fd_err = par_paths(n_paths, |i| {
        let x0 = [-2.0 + 4.0 * (i % 9) as f64 / 8.0];
        let y = [0.3];
        let flow = simulate_variational(&nonlinear, &y, &x0, t_end, dt, seed, i, FlowOrder::First, Record::Terminal)?;
        let jac = flow.jac_x.last().expect("terminal Jacobian")[(0, 0)];
        let fd = finite_difference_x(&nonlinear, &y, &x0, &[1.0], 1e-6, t_end, dt, seed, i)?[0];
        Ok((jac - fd).abs() / jac.abs())
    })?;
    let fd_err = fd_err.into_iter().fold(0.0, f64::max);

    let mut r = ctx.report();
    r.claim(Some(4), "for b = -x the first variation is exp(-t) along every path")
        .at_most("max relative error b=-x", exact_err, 1e-12);
    r.claim(
        Some(4),
        "for a nonlinear b the first variation matches common-random-number finite differences",
    )
    .at_most("max relative error nonlinear", fd_err, 1e-2);
    r.conclude(4, "variational flows", true);
    Ok(r)
}

const HORIZONS: [f64; 4] = [16.0, 64.0, 256.0, 1024.0];
const EPS_LADDER: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// Budgets: `n_paths` per ladder level (default 2000), `dt` of the frozen
/// equation (default 0.01).
///
/// Both ladders reuse one seed at every level. In fast time the coupled
/// system steps exactly like the frozen one, so levels share their noise
/// and the fitted slopes are not thrown off by independent heavy-tailed
/// errors at each level.
pub fn moments(ctx: &Ctx) -> anyhow::Result<Report> {
    let sys = ctx.system()?;
    let alpha = sys.law_fast.alpha();
    let p = 1.0;
    let n_paths = ctx.n_paths(2000);
    let x0 = vec![0.0; sys.fast_dim()];
    let y0 = vec![0.0; sys.slow_dim()];
    let mut r = ctx.report();

    let seed = ctx.seed_for("horizon");
    let mut by_t = Vec::new();
    for t in HORIZONS {
        let (m, se) = frozen_sup_moment(&sys, &y0, &x0, t, ctx.dt(sys.frozen_dt()), p, n_paths, seed)?;
        r.claim(None, "E sup |X_t| of the frozen equation")
            .info(format!("moment T={t}"), m)
            .info(format!("moment stderr T={t}"), se);
        by_t.push(m);
    }
    let seed = ctx.seed_for("eps");
    let mut by_eps = Vec::new();
    for eps in EPS_LADDER {
        let s = sys.clone().with_eps(eps)?;
        let (m, se) = fast_sup_moment(&s, &x0, &y0, 1.0, s.max_multiscale_dt(), p, n_paths, seed)?;
        r.claim(None, "E sup |X^eps_t| of the coupled fast component on [0, 1]")
            .info(format!("moment eps={eps}"), m)
            .info(format!("moment stderr eps={eps}"), se);
        by_eps.push(m);
    }

    let logs = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();
    let fit_t = fit_line(&logs(&HORIZONS), &logs(&by_t));
    let fit_e = fit_line(&logs(&EPS_LADDER), &logs(&by_eps));
    r.claim(Some(5), "E sup_{t<=T} |X_t|^p grows like T^(p/alpha)").near(
        "slope in T",
        fit_t.slope,
        p / alpha,
        0.15,
    );
    r.claim(Some(5), "E sup_{t<=1} |X^eps_t|^p grows like eps^(-2p/alpha)").near(
        "slope in eps",
        fit_e.slope,
        -2.0 * p / alpha,
        0.15,
    );
    r.claim(None, "fit quality").info("r2 in T", fit_t.r2).info("r2 in eps", fit_e.r2);
    r.conclude(5, "moment scaling", true);
    Ok(r)
}
