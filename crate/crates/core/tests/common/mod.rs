//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn normal_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// `Σ_ij = ρ^|i−j|` as a dense matrix.
pub fn ar_dense(n: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rho.powi((i as i32 - j as i32).abs()))
}

/// `yᵀ(Σ⁻¹ − Σ⁻¹V(VᵀΣ⁻¹V)⁻¹VᵀΣ⁻¹)y + 2|V|` through explicit inverses.
pub fn dense_aic(v: &DMatrix<f64>, y: &DVector<f64>, sigma: &DMatrix<f64>) -> f64 {
    let si = sigma.clone().try_inverse().expect("invertible covariance");
    let gram = (v.transpose() * &si * v).try_inverse().expect("full rank design");
    let lambda = &si - &si * v * gram * v.transpose() * &si;
    (y.transpose() * lambda * y)[(0, 0)] + 2.0 * v.ncols() as f64
}

/// Kolmogorov-Smirnov distance of a sample from Uniform(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &p) in s.iter().enumerate() {
        d = d.max((i + 1) as f64 / n - p).max(p - i as f64 / n);
    }
    d
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let pair = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * pair;
        if i % 2 == 1 {
            g += WG[i / 2] * pair;
        }
    }
    (k * h, (k - g).abs() * h)
}

/// Adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, err: f64, tol: f64, depth: u32) -> f64 {
        // roundoff floor keeps the recursion finite
        if err <= tol.max(4.0 * f64::EPSILON * whole.abs()).max(1e-300) || depth > 40 {
            return whole;
        }
        let mid = 0.5 * (a + b);
        let (l, le) = kronrod(f, a, mid);
        let (r, re) = kronrod(f, mid, b);
        rec(f, a, mid, l, le, 0.5 * tol, depth + 1) + rec(f, mid, b, r, re, 0.5 * tol, depth + 1)
    }
    let (whole, err) = kronrod(f, a, b);
    rec(f, a, b, whole, err, rel_tol * whole.abs(), 0)
}

/// Two-sided selective p-value of `z` under `N(0, σ²)` truncated to the union
/// of `intervals`, by quadrature of the rescaled density.
pub fn quadrature_p_value(intervals: &[(f64, f64)], z: f64, sigma_sq: f64) -> f64 {
    let s = sigma_sq.sqrt();
    let nearest = intervals
        .iter()
        .map(|&(lo, hi)| if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) })
        .fold(f64::INFINITY, f64::min);
    // Beyond `reach` the rescaled density is below e^-80.
    let reach = (nearest * nearest + 160.0 * sigma_sq).sqrt();
    let density = move |u: f64| (-(u * u - nearest * nearest) / (2.0 * sigma_sq)).exp();
    let mass = |pieces: &[(f64, f64)]| -> f64 {
        pieces
            .iter()
            .map(|&(lo, hi)| (lo.max(-reach), hi.min(reach)))
            .filter(|(lo, hi)| hi > lo)
            .map(|(lo, hi)| {
                // split at the origin and at ±σ grid points so the peak is resolved
                let mut cuts = vec![lo, hi];
                for k in -12..=12 {
                    let c = k as f64 * s;
                    if c > lo && c < hi {
                        cuts.push(c);
                    }
                }
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                cuts.windows(2).map(|w| integrate(&density, w[0], w[1], 1e-14)).sum::<f64>()
            })
            .sum()
    };
    let t = z.abs();
    let mut tail = Vec::new();
    for &(lo, hi) in intervals {
        if lo < -t {
            tail.push((lo, hi.min(-t)));
        }
        if hi > t {
            tail.push((lo.max(t), hi));
        }
    }
    mass(&tail) / mass(intervals)
}
