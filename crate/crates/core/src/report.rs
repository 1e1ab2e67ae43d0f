//! Per-feature results in the JSON schema shared by every test method.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::afe::{AfeSearcher, SearchConfig};
use crate::baselines::{
    bonferroni_p_value, data_split_test, naive_p_value, oc_p_value, CoefficientSelection,
};
use crate::error::{Error, Result};
use crate::si::{prepare_line, selective_test, IntervalSet};
use crate::stats::{CovarianceKind, CovarianceModel, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Oc,
    Naive,
    Bonferroni,
    Ds,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Proposed,
        Method::Oc,
        Method::Naive,
        Method::Bonferroni,
        Method::Ds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Oc => "oc",
            Method::Naive => "naive",
            Method::Bonferroni => "bonferroni",
            Method::Ds => "ds",
        }
    }

    /// Whether the method tests the features generated on the full data.
    pub fn uses_full_search(self) -> bool {
        self != Method::Ds
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse {
                text: s.to_string(),
                reason: "expected one of proposed, oc, naive, bonferroni, ds".into(),
            })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodResult {
    pub method: Method,
    /// 1-based coefficient index in the design the method tested.
    pub j: usize,
    pub feature: String,
    pub stat: f64,
    pub sigma_eta_sq: f64,
    /// The method's p-value; the key matches the selective test schema.
    #[serde(rename = "p_selective")]
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intervals: Option<IntervalSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_afe_calls: Option<usize>,
    pub wall_time_s: Option<f64>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub singular: bool,
}

/// Every requested method applied to one dataset.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub n: usize,
    pub m: usize,
    pub sigma: CovarianceKind,
    pub config: SearchConfig,
    pub generated: Vec<String>,
    pub aic: f64,
    pub results: Vec<MethodResult>,
    /// Features generated on the data-splitting half, when `ds` was requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds_generated: Option<Vec<String>>,
}

/// Runs the search once and tests the selected coefficients with each method.
/// Wall times are reported only when `timing` is set, so that the report is
/// otherwise a pure function of its inputs.
pub fn run_single_test(
    dataset: &Dataset,
    sigma: &CovarianceModel,
    config: &SearchConfig,
    methods: &[Method],
    selection: &CoefficientSelection,
    timing: bool,
) -> Result<TestReport> {
    let searcher = AfeSearcher::new(dataset.x(), sigma, config)?;
    let observed = searcher.run(dataset.y())?;
    let m = dataset.m();
    let k = observed.generated.len();
    let clock = |start: Instant| timing.then(|| start.elapsed().as_secs_f64());
    let mut results = Vec::new();

    for j in selection.indices(m, k) {
        for &method in methods.iter().filter(|m| m.uses_full_search()) {
            let start = Instant::now();
            let result = if method == Method::Proposed {
                let r = selective_test(&searcher, dataset.y(), &observed, j)?;
                MethodResult {
                    method,
                    j,
                    feature: r.feature,
                    stat: r.stat,
                    sigma_eta_sq: r.sigma_eta_sq,
                    p: r.p_selective,
                    intervals: Some(r.z_set),
                    n_afe_calls: Some(r.n_afe_calls),
                    wall_time_s: clock(start),
                    singular: false,
                }
            } else {
                let (dir, line, design) = prepare_line(&searcher, dataset.y(), &observed, j)?;
                let naive = naive_p_value(line.z_obs, dir.sigma_eta_sq)?;
                let (p, intervals) = match method {
                    Method::Oc => {
                        let (p, (lo, hi)) = oc_p_value(&line, &observed.trace, sigma)?;
                        (p, Some(IntervalSet::interval(lo, hi)))
                    }
                    Method::Bonferroni => (bonferroni_p_value(naive, config), None),
                    _ => (naive, None),
                };
                MethodResult {
                    method,
                    j,
                    feature: crate::si::feature_label(&design, j),
                    stat: line.z_obs,
                    sigma_eta_sq: dir.sigma_eta_sq,
                    p,
                    intervals,
                    n_afe_calls: None,
                    wall_time_s: clock(start),
                    singular: false,
                }
            };
            results.push(result);
        }
    }

    let mut ds_generated = None;
    if methods.contains(&Method::Ds) {
        let start = Instant::now();
        let ds = data_split_test(dataset, sigma, config, config.seed, selection)?;
        let elapsed = clock(start);
        ds_generated = Some(ds.afe.generated.iter().map(|e| e.key().to_string()).collect());
        results.extend(ds.features.into_iter().map(|f| MethodResult {
            method: Method::Ds,
            j: f.j,
            feature: f.feature,
            stat: f.stat,
            sigma_eta_sq: f.sigma_eta_sq,
            p: f.p,
            intervals: None,
            n_afe_calls: None,
            wall_time_s: elapsed,
            singular: f.singular,
        }));
    }

    Ok(TestReport {
        n: dataset.n(),
        m,
        sigma: sigma.kind(),
        config: config.clone(),
        generated: observed.generated.iter().map(|e| e.key().to_string()).collect(),
        aic: observed.best_node.aic,
        results,
        ds_generated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("holm".parse::<Method>().is_err());
    }
}
