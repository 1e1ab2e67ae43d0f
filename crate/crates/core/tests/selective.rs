mod common;

use afesi::afe::{AfeSearcher, SearchConfig};
use afesi::baselines::oc_p_value;
use afesi::si::quadratic::aic_polynomial;
use afesi::si::{interval_for_z, parametric_search_with, prepare_line, selective_p_value, truncated_normal_mass, IntervalSet};
use afesi::stats::{classical_z_p_value, CovarianceModel};
use rand::Rng;

use common::*;

fn instance(seed: u64, n: usize, rho: f64) -> (AfeSearcher, nalgebra::DVector<f64>) {
    let mut rng = rng(seed);
    let x = normal_matrix(n, 3, &mut rng);
    let y = normal_vector(n, &mut rng);
    let sigma = if rho == 0.0 {
        CovarianceModel::identity(n)
    } else {
        CovarianceModel::ar_power(n, rho).unwrap()
    };
    let searcher = AfeSearcher::new(&x, &sigma, &SearchConfig::default().with_seed(seed)).unwrap();
    (searcher, y)
}

#[test]
fn truncation_set_is_sound() {
    let mut rng = rng(100);
    let mut checked = 0;
    for seed in 0..50 {
        let (searcher, y) = instance(seed, 40, if seed % 2 == 0 { 0.0 } else { 0.5 });
        let observed = searcher.run(&y).unwrap();
        if observed.generated.is_empty() {
            continue;
        }
        let target = observed.key_set();
        let j = 3 + 1 + (seed as usize % observed.generated.len());
        let (_, line, _) = prepare_line(&searcher, &y, &observed, j).unwrap();
        let outcome = parametric_search_with(&searcher, &line, &target).unwrap();
        let s = line.sigma_eta();
        let margin = 1e-4 * s;
        let (w_lo, w_hi) = (line.z_obs - 10.0 * s, line.z_obs + 10.0 * s);
        let keys_at = |z: f64| {
            let r = searcher.run(&line.at(z)).unwrap();
            (!r.generated.is_empty(), r.key_set())
        };
        let pieces: Vec<(f64, f64)> = outcome
            .z_set
            .intervals()
            .iter()
            .filter(|(lo, hi)| hi - lo > 4.0 * margin)
            .copied()
            .collect();
        for _ in 0..20 {
            let (lo, hi) = pieces[rng.random_range(0..pieces.len())];
            let z = rng.random_range(lo + margin..hi - margin);
            let (nonempty, keys) = keys_at(z);
            assert!(nonempty && keys == target, "seed {seed}: z {z} in Z gives {keys:?}");
        }
        let inside = |z: f64| {
            outcome
                .z_set
                .intervals()
                .iter()
                .any(|&(lo, hi)| z > lo - margin && z < hi + margin)
        };
        let mut outside = 0;
        for _ in 0..2000 {
            if outside == 20 {
                break;
            }
            let z = rng.random_range(w_lo..w_hi);
            if inside(z) {
                continue;
            }
            outside += 1;
            let (nonempty, keys) = keys_at(z);
            assert!(!nonempty || keys != target, "seed {seed}: z {z} outside Z reproduces the keys");
        }
        checked += 1;
    }
    assert!(checked >= 40, "only {checked} instances had generated features");
}

#[test]
fn invariance_interval_reproduces_the_search() {
    let mut rng = rng(101);
    for seed in 0..30 {
        let (searcher, y) = instance(seed, 30, 0.3);
        let observed = searcher.run(&y).unwrap();
        if observed.generated.is_empty() {
            continue;
        }
        let (_, line, _) = prepare_line(&searcher, &y, &observed, 4).unwrap();
        for shift in [-3.0, 0.0, 2.0] {
            let z0 = line.z_obs + shift * line.sigma_eta();
            let base = searcher.run(&line.at(z0)).unwrap();
            let (lo, hi) = interval_for_z(&base.trace, &line, z0, searcher.covariance()).unwrap();
            assert!(lo <= z0 && z0 <= hi);
            let width = (hi - lo).min(20.0 * line.sigma_eta());
            let (a, b) = (lo.max(z0 - width), hi.min(z0 + width));
            let margin = 1e-6 * (b - a);
            for _ in 0..20 {
                let z = rng.random_range(a + margin..=b - margin);
                let again = searcher.run(&line.at(z)).unwrap();
                assert_eq!(again.key_set(), base.key_set());
                assert_eq!(again.candidate_keys(), base.candidate_keys());
                let kept = |r: &afesi::afe::AfeResult| r.levels.iter().map(|l| l.kept.clone()).collect::<Vec<_>>();
                assert_eq!(kept(&again), kept(&base));
            }
        }
    }
}

#[test]
fn aic_polynomial_matches_direct_evaluation() {
    let mut rng = rng(102);
    let n = 20;
    let dense = ar_dense(n, 0.4);
    let sigma = CovarianceModel::ar_power(n, 0.4).unwrap();
    for _ in 0..10 {
        let (searcher, y) = instance(rng.random(), n, 0.4);
        let observed = searcher.run(&y).unwrap();
        if observed.generated.is_empty() {
            continue;
        }
        let (_, line, design) = prepare_line(&searcher, &y, &observed, 1).unwrap();
        let q = aic_polynomial(design.columns(), &line, &sigma).unwrap();
        for r in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let direct = dense_aic(design.columns(), &line.at(r), &dense);
            assert!((q.eval(r) - direct).abs() <= 1e-9 * direct.abs().max(1.0), "{r}: {} vs {direct}", q.eval(r));
        }
    }
}

#[test]
fn p_value_is_scale_invariant() {
    let z = IntervalSet::from_intervals(vec![(-4.0, -1.2), (0.5, 0.9), (1.7, 6.0)]);
    for (z_obs, s2) in [(1.8, 1.0), (0.7, 0.3), (-2.0, 2.5)] {
        let base = selective_p_value(z_obs, &z, s2).unwrap();
        for c in [1e-3, 0.5, 7.0, 1e4] {
            let scaled = selective_p_value(z_obs * c, &z.scale(c), s2 * c * c).unwrap();
            assert!((scaled - base).abs() < 1e-10, "c {c}: {scaled} vs {base}");
        }
    }
}

#[test]
fn untruncated_p_value_is_classical() {
    let got = selective_p_value(3.0, &IntervalSet::real_line(), 4.0).unwrap();
    let classical = classical_z_p_value(3.0, 4.0).unwrap();
    let quad = quadrature_p_value(&[(f64::NEG_INFINITY, f64::INFINITY)], 3.0, 4.0);
    assert!((got - quad).abs() < 1e-10, "{got} vs {quad}");
    assert!((classical - quad).abs() < 1e-10, "{classical} vs {quad}");
}

#[test]
fn truncated_mass_matches_quadrature() {
    let z = IntervalSet::from_intervals(vec![(-3.0, -1.0), (2.0, 4.0)]);
    for (mu, s2) in [(0.0, 1.0), (0.5, 2.0), (-1.0, 0.25)] {
        let density = |u: f64| (-(u - mu) * (u - mu) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
        let expected = integrate(&density, -3.0, -1.0, 1e-14) + integrate(&density, 2.0, 4.0, 1e-14);
        let got = truncated_normal_mass(&z, mu, s2).unwrap();
        assert!((got - expected).abs() < 1e-10, "mu {mu}: {got} vs {expected}");
    }
}

#[test]
fn one_sided_truncation_p_value() {
    let z = IntervalSet::interval(1.5, 4.0);
    let got = selective_p_value(2.0, &z, 1.0).unwrap();
    let expected = quadrature_p_value(&[(1.5, 4.0)], 2.0, 1.0);
    assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
}

#[test]
fn over_conditioned_p_value_matches_quadrature() {
    let mut checked = 0;
    for seed in 0..20 {
        let (searcher, y) = instance(200 + seed, 40, 0.0);
        let observed = searcher.run(&y).unwrap();
        if observed.generated.is_empty() {
            continue;
        }
        let (_, line, _) = prepare_line(&searcher, &y, &observed, 4).unwrap();
        let (p, interval) = oc_p_value(&line, &observed.trace, searcher.covariance()).unwrap();
        let expected = quadrature_p_value(&[interval], line.z_obs, line.sigma_eta_sq);
        assert!((p - expected).abs() < 1e-8, "seed {seed}: {p} vs {expected}");
        checked += 1;
    }
    assert!(checked >= 10);
}
