//! Order-stable reductions and the goodness-of-fit statistics used throughout
//! the crate: Kolmogorov–Smirnov (one- and two-sample), empirical Wasserstein
//! distances, least-squares fits and jackknife errors.

use std::cmp::Ordering;

use serde::Serialize;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    pub fn from_samples(xs: &[f64]) -> Self {
        let (value, stderr) = mean_and_stderr(xs);
        Self { value, stderr }
    }

    /// `|value - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }
}

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on how the values were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean and its standard error `s / sqrt(n)`.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return (m, f64::INFINITY);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// Empirical quantile (type 7, linear interpolation) of already sorted data.
pub fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

/// One-sample KS statistic `sup |F_n - F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let xs = sorted(samples);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let f = cdf(x);
        let upper = (i + 1) as f64 / n - f;
        let lower = f - i as f64 / n;
        acc.max(upper).max(lower)
    })
}

/// Two-sample KS statistic `sup |F_n - G_m|`, ties handled exactly.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let xs = sorted(a);
    let ys = sorted(b);
    ks_two_sample_sorted(&xs, &ys)
}

pub fn ks_two_sample_sorted(xs: &[f64], ys: &[f64]) -> f64 {
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Kolmogorov distribution survival function `P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a one-sample KS statistic `d` at sample size `n`
/// (with the Stephens finite-size correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let en = (n as f64).sqrt();
    kolmogorov_survival((en + 0.12 + 0.11 / en) * d)
}

pub fn ks_two_sample_pvalue(d: f64, n: usize, m: usize) -> f64 {
    let ne = (n as f64 * m as f64) / (n + m) as f64;
    ks_pvalue(d, ne.round().max(1.0) as usize)
}

/// Asymptotic `c(level) * sqrt((n + m) / (n m))` with `c = sqrt(-ln(level/2) / 2)`.
pub fn ks_two_sample_critical(level: f64, n: usize, m: usize) -> f64 {
    let c = (-(level / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

pub fn ks_one_sample_critical(level: f64, n: usize) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Empirical Wasserstein-`p` distance between two samples via the monotone
/// (quantile) coupling: `(int_0^1 |F^-1(u) - G^-1(u)|^p du)^(1/p)`.
pub fn wasserstein(a: &[f64], b: &[f64], p: f64) -> f64 {
    let xs = sorted(a);
    let ys = sorted(b);
    wasserstein_sorted(&xs, &ys, p)
}

pub fn wasserstein_sorted(xs: &[f64], ys: &[f64], p: f64) -> f64 {
    let (n, m) = (xs.len(), ys.len());
    let mut terms = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    // Walk the merged quantile breakpoints i/n and j/m.
    while i < n && j < m {
        let ui = (i + 1) as f64 / n as f64;
        let uj = (j + 1) as f64 / m as f64;
        let next = ui.min(uj);
        terms.push((next - u) * (xs[i] - ys[j]).abs().powf(p));
        u = next;
        if ui <= uj {
            i += 1;
        }
        if uj <= ui {
            j += 1;
        }
    }
    pairwise_sum(&terms).powf(1.0 / p)
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_stderr: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if n > 2.0 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LineFit {
        slope,
        intercept,
        r2,
        slope_stderr,
    }
}

/// Delete-one-block jackknife for a weighted mean `sum w_i f_i / sum w_i`.
///
/// Samples are split into `blocks` contiguous groups; with one sample per
/// block this is the classical delete-one jackknife. Contiguous blocks keep
/// the error honest for samples read off a single correlated trajectory.
pub fn weighted_mean_jackknife(values: &[f64], weights: &[f64], blocks: usize) -> (f64, f64) {
    let n = values.len();
    assert_eq!(n, weights.len());
    if n == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let g = blocks.clamp(1, n);
    let wf: Vec<f64> = values.iter().zip(weights).map(|(v, w)| v * w).collect();
    let sw = pairwise_sum(weights);
    let swf = pairwise_sum(&wf);
    let est = swf / sw;
    if g < 2 {
        return (est, f64::INFINITY);
    }
    let bounds: Vec<usize> = (0..=g).map(|k| k * n / g).collect();
    let loo: Vec<f64> = bounds
        .windows(2)
        .map(|r| {
            let bw = pairwise_sum(&weights[r[0]..r[1]]);
            let bwf = pairwise_sum(&wf[r[0]..r[1]]);
            (swf - bwf) / (sw - bw)
        })
        .collect();
    let m = mean(&loo);
    let ss: Vec<f64> = loo.iter().map(|t| (t - m) * (t - m)).collect();
    let var = (g - 1) as f64 / g as f64 * pairwise_sum(&ss);
    (est, var.sqrt())
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}
