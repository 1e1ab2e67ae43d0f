//! Comparison procedures: over-conditioning, naive z-test, Bonferroni and
//! data splitting.

use serde::Serialize;

use crate::afe::{run_afe, AfeResult, ComparisonTrace, SearchConfig, SearchRng};
use crate::error::{Error, Result};
use crate::si::{interval_for_z, selective_p_value, IntervalSet, LineParameterization};
use crate::stats::linear::direction_for_columns;
use crate::stats::{classical_z_p_value, AugmentedDesign, CovarianceModel, Dataset};

/// Selective p-value conditioned only on the invariance interval around the
/// observed statistic. Returns the p-value and that interval.
pub fn oc_p_value(
    line: &LineParameterization,
    trace: &ComparisonTrace,
    sigma: &CovarianceModel,
) -> Result<(f64, (f64, f64))> {
    let (lo, hi) = interval_for_z(trace, line, line.z_obs, sigma)?;
    let z = IntervalSet::interval(lo, hi);
    Ok((selective_p_value(line.z_obs, &z, line.sigma_eta_sq)?, (lo, hi)))
}

pub fn naive_p_value(stat: f64, sigma_eta_sq: f64) -> Result<f64> {
    classical_z_p_value(stat, sigma_eta_sq)
}

/// `Σ_{d=1}^{D} N^d`, the count of possible generated feature sets.
pub fn bonferroni_multiplier(config: &SearchConfig) -> f64 {
    (1..=config.max_depth)
        .map(|d| (config.max_nodes as f64).powi(d as i32))
        .sum()
}

pub fn bonferroni_p_value(p_naive: f64, config: &SearchConfig) -> f64 {
    (bonferroni_multiplier(config) * p_naive).min(1.0)
}

/// Disjoint generation/test row split; the generation half takes the extra
/// row when `n` is odd.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitPlan {
    pub gen_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn new(n: usize, seed: u64) -> Self {
        let perm = SearchRng::new(seed).permutation(n);
        let cut = n.div_ceil(2);
        let mut gen_indices = perm[..cut].to_vec();
        let mut test_indices = perm[cut..].to_vec();
        gen_indices.sort_unstable();
        test_indices.sort_unstable();
        Self {
            gen_indices,
            test_indices,
            seed,
        }
    }
}

/// Which coefficients of the test-half design to test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoefficientSelection {
    /// Every generated feature, `j ∈ {m+1, …, m+k}`.
    Generated,
    /// Every coefficient.
    All,
    /// Explicit 1-based indices; out-of-range entries are skipped.
    Explicit(Vec<usize>),
}

impl CoefficientSelection {
    pub fn indices(&self, m: usize, k: usize) -> Vec<usize> {
        match self {
            CoefficientSelection::Generated => (m + 1..=m + k).collect(),
            CoefficientSelection::All => (1..=m + k).collect(),
            CoefficientSelection::Explicit(v) => {
                v.iter().copied().filter(|&j| j >= 1 && j <= m + k).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DsFeatureResult {
    pub j: usize,
    pub feature: String,
    pub stat: f64,
    pub sigma_eta_sq: f64,
    pub p: f64,
    /// Set when the test-half design was rank deficient; `p` is then 1.
    pub singular: bool,
}

#[derive(Debug, Clone)]
pub struct DataSplitOutcome {
    pub plan: SplitPlan,
    /// Search run on the generation half.
    pub afe: AfeResult,
    pub features: Vec<DsFeatureResult>,
}

/// Generates features on one half of the rows and tests them with classical
/// z-tests on the other half.
pub fn data_split_test(
    dataset: &Dataset,
    sigma: &CovarianceModel,
    config: &SearchConfig,
    split_seed: u64,
    selection: &CoefficientSelection,
) -> Result<DataSplitOutcome> {
    let (n, m) = (dataset.n(), dataset.m());
    if n < 2 * (m + 1) {
        return Err(Error::InvalidConfig(format!(
            "data splitting needs n >= 2(m+1), got n = {n}, m = {m}"
        )));
    }
    let plan = SplitPlan::new(n, split_seed);
    let gen = dataset.select_rows(&plan.gen_indices)?;
    let test = dataset.select_rows(&plan.test_indices)?;
    let gen_sigma = sigma.principal_submatrix(&plan.gen_indices)?;
    let test_sigma = sigma.principal_submatrix(&plan.test_indices)?;

    let afe = run_afe(&gen, &gen_sigma, config)?;
    let design = AugmentedDesign::new(test.x(), afe.generated.clone());
    let mut features = Vec::new();
    for j in selection.indices(m, design.k()) {
        let feature = crate::si::feature_label(&design, j);
        let result = match direction_for_columns(design.columns(), j, &test_sigma) {
            Ok(dir) => {
                let stat = dir.eta.dot(test.y());
                DsFeatureResult {
                    j,
                    feature,
                    stat,
                    sigma_eta_sq: dir.sigma_eta_sq,
                    p: classical_z_p_value(stat, dir.sigma_eta_sq)?,
                    singular: false,
                }
            }
            Err(Error::SingularDesign { .. }) | Err(Error::InvalidDirection) => DsFeatureResult {
                j,
                feature,
                stat: f64::NAN,
                sigma_eta_sq: f64::NAN,
                p: 1.0,
                singular: true,
            },
            Err(e) => return Err(e),
        };
        features.push(result);
    }
    Ok(DataSplitOutcome {
        plan,
        afe,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_multiplier_for_default_search() {
        let c = SearchConfig::default();
        assert_eq!(bonferroni_multiplier(&c), 1092.0);
        assert_eq!(bonferroni_p_value(0.0, &c), 0.0);
        assert_eq!(bonferroni_p_value(0.01, &c), 1.0);
        assert!((bonferroni_p_value(1e-5, &c) - 0.01092).abs() < 1e-15);
    }

    #[test]
    fn split_plan_sizes_and_disjointness() {
        for n in [10, 11, 57] {
            let plan = SplitPlan::new(n, 3);
            assert_eq!(plan.gen_indices.len(), n.div_ceil(2));
            assert_eq!(plan.test_indices.len(), n / 2);
            let mut all: Vec<usize> = plan
                .gen_indices
                .iter()
                .chain(&plan.test_indices)
                .copied()
                .collect();
            all.sort();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            assert_eq!(plan, SplitPlan::new(n, 3));
        }
        assert_ne!(SplitPlan::new(40, 1), SplitPlan::new(40, 2));
    }

    #[test]
    fn selection_indices() {
        assert_eq!(CoefficientSelection::Generated.indices(2, 3), vec![3, 4, 5]);
        assert_eq!(CoefficientSelection::All.indices(1, 1), vec![1, 2]);
        assert_eq!(
            CoefficientSelection::Explicit(vec![0, 2, 9]).indices(2, 1),
            vec![2]
        );
    }
}
