//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Integral value with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Quad {
    type Output = Quad;
    fn add(self, o: Quad) -> Quad {
        Quad {
            value: self.value + o.value,
            error: self.error + o.error,
        }
    }
}

impl Quad {
    pub const ZERO: Quad = Quad {
        value: 0.0,
        error: 0.0,
    };
}

/// One 15-point Kronrod rule with the embedded 7-point Gauss difference as error.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Quad {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Quad {
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

const MAX_INTERVALS: usize = 2000;

struct Piece {
    a: f64,
    b: f64,
    q: Quad,
}

// Global bisection: always split the interval with the largest error estimate
// until the summed estimate meets `tol` or the interval budget is spent.
fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: Quad, tol: f64) -> Quad {
    let mut pieces = vec![Piece { a, b, q: whole }];
    let mut total = whole;
    while total.error > tol && pieces.len() < MAX_INTERVALS {
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| {
                if p.q.error > acc.1 {
                    (i, p.q.error)
                } else {
                    acc
                }
            });
        let p = pieces.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            pieces.push(p);
            break;
        }
        let left = gk15(f, p.a, m);
        let right = gk15(f, m, p.b);
        pieces.push(Piece { a: p.a, b: m, q: left });
        pieces.push(Piece { a: m, b: p.b, q: right });
        total = pieces.iter().fold(Quad::ZERO, |acc, p| acc + p.q);
    }
    total
}

/// Adaptive integral of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Returns the best estimate even when the tolerance was not reached; use
/// [`integrate_checked`] to turn that into an error.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quad {
    if a == b {
        return Quad::ZERO;
    }
    let whole = gk15(&f, a, b);
    adapt(&f, a, b, whole, tol)
}

pub fn integrate_checked<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Quad> {
    let q = integrate(f, a, b, tol);
    check(q, tol)
}

/// Sum of adaptive integrals over consecutive panels `[p[i], p[i+1]]`,
/// with the tolerance split evenly across panels.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> Quad {
    if breaks.len() < 2 {
        return Quad::ZERO;
    }
    let per = tol / (breaks.len() - 1) as f64;
    breaks
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], per))
        .fold(Quad::ZERO, |acc, q| acc + q)
}

pub(crate) fn check(q: Quad, tol: f64) -> Result<Quad> {
    if !q.value.is_finite() || q.error > 10.0 * tol {
        Err(Error::Quadrature {
            achieved: q.error,
            requested: tol,
        })
    } else {
        Ok(q)
    }
}

/// Uniform breakpoints from `a` to `b` with panels no wider than `width`.
pub fn panel_breaks(a: f64, b: f64, width: f64) -> Vec<f64> {
    let n = (((b - a) / width).ceil() as usize).max(1);
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kronrod_exact_for_degree_22() {
        // x^22 on [-1, 1] integrates to 2/23.
        let q = gk15(&|x: f64| x.powi(22), -1.0, 1.0);
        assert_abs_diff_eq!(q.value, 2.0 / 23.0, epsilon = 1e-14);
        // Gauss-7 is exact through degree 13, so the difference vanishes there.
        let q = gk15(&|x: f64| x.powi(12) + x.powi(13), -1.0, 1.0);
        assert!(q.error < 1e-14);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let q = gk15(&|_| 1.0, 2.0, 5.0);
        assert_abs_diff_eq!(q.value, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // integral of x^{-1/2} on [0,1] is 2; the rule never samples x = 0.
        let q = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-9);
        assert_abs_diff_eq!(q.value, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn oscillatory_panels() {
        let breaks = panel_breaks(0.0, 20.0 * std::f64::consts::PI, 1.0);
        let q = integrate_panels(|x: f64| (3.0 * x).sin().powi(2), &breaks, 1e-10);
        assert_abs_diff_eq!(q.value, 10.0 * std::f64::consts::PI, epsilon = 1e-9);
    }

    #[test]
    fn checked_reports_failure() {
        // Non-integrable singularity: the error estimate on the first panel never shrinks.
        let err = integrate_checked(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10);
        assert!(matches!(err, Err(Error::Quadrature { .. })));
    }
}
