//! Standard normal distribution functions with tail-stable logarithms.

use libm::{erf, erfc};
use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Beyond this point the survival function is evaluated through the Mills
/// ratio instead of `erfc`, which underflows near 37.
const MILLS_SWITCH: f64 = 25.0;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail probability `1 - Φ(x)`.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `ln(1 - Φ(x))`, finite for every finite `x`.
pub fn log_sf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x <= 0.0 {
        (-sf(-x)).ln_1p()
    } else if x < MILLS_SWITCH {
        erfc(x * FRAC_1_SQRT_2).ln() - LN_2
    } else {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio(x).ln()
    }
}

/// `ln Φ(x)`.
pub fn log_cdf(x: f64) -> f64 {
    log_sf(-x)
}

/// `(1 - Φ(x)) / φ(x)` for large positive `x` via a Lentz continued fraction.
fn mills_ratio(x: f64) -> f64 {
    // R(x) = 1 / (x + 1/(x + 2/(x + 3/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `ln(Φ(hi) - Φ(lo))` for `lo <= hi`, accurate when both endpoints sit deep
/// in the same tail. Returns `-inf` for an empty or degenerate interval.
pub fn log_mass(lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return f64::NEG_INFINITY;
    }
    if lo >= 0.0 {
        upper_tail_difference(lo, hi)
    } else if hi <= 0.0 {
        upper_tail_difference(-hi, -lo)
    } else {
        // Straddles zero: erf is accurate near the origin.
        let upper = if hi.is_infinite() { 1.0 } else { erf(hi * FRAC_1_SQRT_2) };
        let lower = if lo.is_infinite() { -1.0 } else { erf(lo * FRAC_1_SQRT_2) };
        (0.5 * (upper - lower)).ln()
    }
}

// Positive half of the 12-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 6] = [
    0.125_233_408_511_468_9,
    0.367_831_498_998_180_2,
    0.587_317_954_286_617_5,
    0.769_902_674_194_304_7,
    0.904_117_256_370_474_8,
    0.981_560_634_246_719_2,
];
const GL_WEIGHTS: [f64; 6] = [
    0.249_147_045_813_402_7,
    0.233_492_536_538_354_64,
    0.203_167_426_723_065_65,
    0.160_078_328_543_346_1,
    0.106_939_325_995_318_88,
    0.047_175_336_386_512_02,
];

// ln(S(lo) - S(hi)) for 0 <= lo < hi.
fn upper_tail_difference(lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if w.is_finite() && w * (lo + 0.5 * w) <= 1.0 {
        // Narrow interval: S(lo) - S(hi) = φ(lo) ∫_0^w exp(-lo t - t²/2) dt,
        // which avoids cancelling two nearly equal tail logs.
        let half = 0.5 * w;
        let g = |t: f64| (-lo * t - 0.5 * t * t).exp();
        let integral: f64 = GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(&x, wt)| wt * (g(half * (1.0 + x)) + g(half * (1.0 - x))))
            .sum::<f64>()
            * half;
        return -0.5 * lo * lo - LN_SQRT_2PI + integral.ln();
    }
    let log_lo = log_sf(lo);
    let log_hi = log_sf(hi);
    if log_hi == f64::NEG_INFINITY {
        return log_lo;
    }
    let d = log_hi - log_lo;
    if d >= 0.0 {
        return f64::NEG_INFINITY;
    }
    log_lo + (-d.exp_m1()).ln()
}

/// `ln(Σ exp(v))`, or `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
