mod common;

use afesi::afe::SearchConfig;
use afesi::baselines::{bonferroni_p_value, data_split_test, CoefficientSelection, SplitPlan};
use afesi::harness::{
    estimate_variance, gen_null_dataset, run_power_experiment, run_type1_experiment, ExperimentSpec, Mode,
};
use afesi::report::Method;
use afesi::stats::{CovarianceModel, Dataset};
use nalgebra::DMatrix;
use proptest::prelude::*;

use common::*;

#[test]
fn null_data_has_the_requested_moments() {
    let (n, reps) = (10, 5000);
    for rho in [0.0, 0.5] {
        let sigma = if rho == 0.0 {
            CovarianceModel::identity(n)
        } else {
            CovarianceModel::ar_power(n, rho).unwrap()
        };
        let mut yy = DMatrix::<f64>::zeros(n, n);
        let mut x_sq = 0.0;
        for r in 0..reps {
            let d = gen_null_dataset(n, 3, &sigma, 10_000 + r as u64).unwrap();
            yy += d.y() * d.y().transpose();
            x_sq += d.x().norm_squared();
        }
        yy /= reps as f64;
        let target = ar_dense(n, rho);
        let tol = if rho == 0.0 { 0.07 } else { 0.05 };
        assert!((&yy - &target).amax() < tol, "rho {rho}: {:.3}", (&yy - &target).amax());
        let x_var = x_sq / (reps * n * 3) as f64;
        assert!((x_var - 1.0).abs() < 0.02, "{x_var}");
        if rho == 0.0 {
            assert!((0.93..=1.07).contains(&yy[(0, 0)]), "{}", yy[(0, 0)]);
        }
    }
}

#[test]
fn ar_covariance_converges_with_many_draws() {
    let (n, reps) = (10, 200_000u64);
    let sigma = CovarianceModel::ar_power(n, 0.5).unwrap();
    let mut yy = DMatrix::<f64>::zeros(n, n);
    for r in 0..reps {
        let d = gen_null_dataset(n, 1, &sigma, 1_000_000 + r).unwrap();
        yy += d.y() * d.y().transpose();
    }
    yy /= reps as f64;
    let err = (&yy - &ar_dense(n, 0.5)).amax();
    assert!(err < 0.015, "{err}");
}

#[test]
fn variance_estimate_matches_projection() {
    let mut rng = rng(20);
    for _ in 0..20 {
        let x = normal_matrix(30, 4, &mut rng);
        let y = normal_vector(30, &mut rng) * 1.7;
        let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
        let resid = &y - &x * (xtx_inv * x.transpose() * &y);
        let expected = resid.norm_squared() / 26.0;
        let got = estimate_variance(&Dataset::new(x, y).unwrap()).unwrap();
        assert!((got - expected).abs() < 1e-9 * expected, "{got} vs {expected}");
    }
}

#[test]
fn data_split_p_values_are_uniform_under_the_null() {
    let sigma = CovarianceModel::identity(100);
    let config = SearchConfig::default();
    let mut p = Vec::new();
    for r in 0..1000u64 {
        let data = gen_null_dataset(100, 4, &sigma, 50_000 + r).unwrap();
        let outcome = data_split_test(&data, &sigma, &config.clone().with_seed(r), r, &CoefficientSelection::Generated).unwrap();
        if let Some(first) = outcome.features.iter().find(|f| !f.singular) {
            p.push(first.p);
        }
    }
    assert!(p.len() > 900);
    let ks = ks_uniform(&p);
    assert!(ks < 0.043, "ks {ks} over {}", p.len());
}

#[test]
fn bonferroni_rejects_no_more_than_the_proposed_test() {
    let mut spec = ExperimentSpec::new(Mode::Type1);
    spec.reps = 300;
    spec.base_seed = 777;
    spec.methods = vec![Method::Proposed, Method::Bonferroni];
    let summary = run_type1_experiment(&spec).unwrap().summary;
    let rate = |m| summary.method(m).unwrap().rate;
    assert!(rate(Method::Bonferroni) <= rate(Method::Proposed));
}

#[test]
fn power_grows_with_signal() {
    let power = |delta: f64| {
        let mut spec = ExperimentSpec::new(Mode::Power);
        spec.delta = delta;
        spec.target_tests = 500;
        spec.base_seed = 31;
        spec.methods = vec![Method::Proposed];
        let summary = run_power_experiment(&spec).unwrap().summary;
        assert_eq!(summary.target_reached, Some(true));
        summary.method(Method::Proposed).unwrap().rate
    };
    let (low, high) = (power(0.2), power(0.8));
    assert!(high >= low, "{high} < {low}");
}

proptest! {
    #[test]
    fn bonferroni_is_capped_and_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, depth in 1usize..7, nodes in 1usize..5) {
        let config = SearchConfig { max_depth: depth, max_nodes: nodes, ..SearchConfig::default() };
        let (pa, pb) = (bonferroni_p_value(a, &config), bonferroni_p_value(b, &config));
        prop_assert!(pa <= 1.0 && pa >= a);
        if a <= b {
            prop_assert!(pa <= pb);
        }
    }

    #[test]
    fn split_halves_partition_the_rows(n in 2usize..300, seed in any::<u64>()) {
        let plan = SplitPlan::new(n, seed);
        prop_assert_eq!(plan.gen_indices.len(), n.div_ceil(2));
        let mut all: Vec<usize> = plan.gen_indices.iter().chain(&plan.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(SplitPlan::new(n, seed), plan);
    }
}
