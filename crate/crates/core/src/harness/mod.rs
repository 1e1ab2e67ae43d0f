//! Monte-Carlo experiments: type-I error, power and real-data subsampling.
//!
//! Seeds: replication `r` uses `rep_seed = base_seed + r` for its data. The
//! search seed is `mix_seed(rep_seed, 1)`, the data-splitting permutation
//! uses `mix_seed(rep_seed, 2)` and real-data subsampling uses
//! `mix_seed(rep_seed, 4)`.

pub mod data;
pub mod output;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::afe::{mix_seed, AfeResult, AfeSearcher, SearchConfig};
use crate::baselines::{
    bonferroni_p_value, data_split_test, naive_p_value, oc_p_value, CoefficientSelection,
};
use crate::error::{Error, Result};
use crate::report::Method;
use crate::si::{prepare_line, selective_test};
use crate::stats::{aic, AugmentedDesign, CovarianceModel, Dataset};

pub use data::{
    estimate_variance, gen_null_dataset, gen_power_dataset, load_csv, standardize,
    subsample_rows, true_features, CsvData,
};
pub use output::{write_records_csv, write_summary_json};

pub const STREAM_SEARCH: u64 = 1;
pub const STREAM_SPLIT: u64 = 2;
pub const STREAM_SUBSAMPLE: u64 = 4;

/// Replications per parallel batch in power mode.
const POWER_BATCH: usize = 64;
/// Replication budget per requested matched test in power mode.
const POWER_BUDGET_FACTOR: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Type1,
    Power,
    Realdata,
}

/// Noise covariance used to draw data and to run inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaSpec {
    Identity,
    ArPower { rho: f64 },
    Scaled { variance: f64 },
    /// Data drawn with `Σ = I`; inference plugs in `σ̂² I`.
    Estimated,
}

impl SigmaSpec {
    /// Covariance of the simulated noise.
    pub fn data_covariance(&self, n: usize) -> Result<CovarianceModel> {
        match *self {
            SigmaSpec::Identity | SigmaSpec::Estimated => Ok(CovarianceModel::identity(n)),
            SigmaSpec::ArPower { rho } => CovarianceModel::ar_power(n, rho),
            SigmaSpec::Scaled { variance } => CovarianceModel::scaled_identity(n, variance),
        }
    }

    /// Covariance handed to the search and the tests.
    pub fn inference_covariance(&self, dataset: &Dataset) -> Result<CovarianceModel> {
        match self {
            SigmaSpec::Estimated => {
                CovarianceModel::scaled_identity(dataset.n(), estimate_variance(dataset)?)
            }
            other => other.data_covariance(dataset.n()),
        }
    }
}

impl fmt::Display for SigmaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaSpec::Identity => f.write_str("identity"),
            SigmaSpec::ArPower { rho } => write!(f, "ar:{rho}"),
            SigmaSpec::Scaled { variance } => write!(f, "scaled:{variance}"),
            SigmaSpec::Estimated => f.write_str("estimated"),
        }
    }
}

impl FromStr for SigmaSpec {
    type Err = Error;

    /// `identity`, `ar:<rho>`, `scaled:<variance>` or `estimated`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Parse {
            text: s.to_string(),
            reason: reason.to_string(),
        };
        let number = |v: &str| v.parse::<f64>().map_err(|_| bad("expected a number after ':'"));
        let spec = match s.split_once(':') {
            None if s == "identity" => SigmaSpec::Identity,
            None if s == "estimated" => SigmaSpec::Estimated,
            Some(("ar", v)) => SigmaSpec::ArPower { rho: number(v)? },
            Some(("scaled", v)) => SigmaSpec::Scaled { variance: number(v)? },
            _ => return Err(bad("expected identity, ar:<rho>, scaled:<v> or estimated")),
        };
        match spec {
            SigmaSpec::ArPower { rho } if !(rho.abs() < 1.0) => Err(bad("rho must lie in (-1, 1)")),
            SigmaSpec::Scaled { variance } if !(variance > 0.0 && variance.is_finite()) => {
                Err(bad("variance must be positive"))
            }
            ok => Ok(ok),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub n: usize,
    pub m: usize,
    pub sigma: SigmaSpec,
    pub delta: f64,
    pub reps: usize,
    pub base_seed: u64,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub afe: SearchConfig,
    /// Matched tests to collect in power mode.
    pub target_tests: usize,
    /// Worker threads; 0 lets the pool decide.
    #[serde(skip)]
    pub threads: usize,
    /// Source file in real-data mode, for the summary only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            n: 100,
            m: 4,
            sigma: SigmaSpec::Identity,
            delta: 0.0,
            reps: 1000,
            base_seed: 0,
            alpha: 0.05,
            methods: Method::ALL.to_vec(),
            afe: SearchConfig::default(),
            target_tests: 300,
            threads: 0,
            csv: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.reps == 0 {
            return fail("reps must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return fail(format!("delta must be finite and >= 0, got {}", self.delta));
        }
        if self.n == 0 || self.m == 0 {
            return fail("n and m must be positive".into());
        }
        if self.methods.is_empty() {
            return fail("no methods requested".into());
        }
        if self.mode == Mode::Power {
            if self.m < 4 {
                return fail(format!("power mode needs m >= 4, got {}", self.m));
            }
            if self.target_tests == 0 {
                return fail("target_tests must be at least 1".into());
            }
        }
        if self.methods.contains(&Method::Ds) && self.n < 2 * (self.m + 1) {
            return fail(format!("ds needs n >= 2(m+1), got n = {}, m = {}", self.n, self.m));
        }
        self.afe.validate()
    }
}

/// One tested coefficient under one method, or a placeholder row for a
/// replication that produced nothing to test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub method: Method,
    /// 1-based coefficient index; 0 for placeholder rows.
    pub j: usize,
    pub feature_key: String,
    pub stat: f64,
    pub p: f64,
    pub rejected: bool,
    pub matched_true: bool,
    /// AIC of the final model the method's features come from.
    pub aic_final: f64,
    /// `ok`, `empty` (no generated features), `singular` or `error: …`.
    pub status: String,
    #[serde(skip)]
    pub wall_time: f64,
}

impl ReplicationRecord {
    pub fn is_test(&self) -> bool {
        self.status == "ok" || self.status == "singular"
    }
}

/// Everything one replication produced.
#[derive(Debug, Clone)]
pub struct ReplicationOutcome {
    pub rep: usize,
    pub records: Vec<ReplicationRecord>,
    /// Generated features matching a true feature (power mode), counted on
    /// the full-data search, or on the split search when only ds runs.
    pub matched: usize,
    pub full_search_empty: bool,
    pub failed: Option<String>,
    /// Final-model AIC per method, NaN when unavailable.
    pub aic: Vec<(Method, f64)>,
}

enum Source<'a> {
    Null,
    Power,
    Real(&'a Dataset),
}

struct Tested {
    j: usize,
    key: String,
    matched: bool,
}

fn record(rep: usize, method: Method, aic_final: f64) -> ReplicationRecord {
    ReplicationRecord {
        rep,
        method,
        j: 0,
        feature_key: String::new(),
        stat: f64::NAN,
        p: f64::NAN,
        rejected: false,
        matched_true: false,
        aic_final,
        status: "ok".into(),
        wall_time: 0.0,
    }
}

fn selected(
    result: &AfeResult,
    m: usize,
    truth: &[String],
    only_matched: bool,
) -> Vec<Tested> {
    result
        .generated
        .iter()
        .enumerate()
        .map(|(i, f)| Tested {
            j: m + i + 1,
            key: f.key().to_string(),
            matched: truth.iter().any(|t| t == f.key()),
        })
        .filter(|t| !only_matched || t.matched)
        .collect()
}

fn full_search_p(
    method: Method,
    searcher: &AfeSearcher,
    dataset: &Dataset,
    observed: &AfeResult,
    sigma: &CovarianceModel,
    config: &SearchConfig,
    j: usize,
) -> Result<(f64, f64)> {
    if method == Method::Proposed {
        let r = selective_test(searcher, dataset.y(), observed, j)?;
        return Ok((r.stat, r.p_selective));
    }
    let (dir, line, _) = prepare_line(searcher, dataset.y(), observed, j)?;
    let p = match method {
        Method::Oc => oc_p_value(&line, &observed.trace, sigma)?.0,
        Method::Naive => naive_p_value(line.z_obs, dir.sigma_eta_sq)?,
        Method::Bonferroni => bonferroni_p_value(naive_p_value(line.z_obs, dir.sigma_eta_sq)?, config),
        Method::Proposed | Method::Ds => unreachable!("handled separately"),
    };
    Ok((line.z_obs, p))
}

fn run_replication(spec: &ExperimentSpec, source: &Source<'_>, rep: usize) -> ReplicationOutcome {
    match try_replication(spec, source, rep) {
        Ok(outcome) => outcome,
        Err(e) => {
            let status = format!("error: {e}");
            ReplicationOutcome {
                rep,
                records: spec
                    .methods
                    .iter()
                    .map(|&m| ReplicationRecord {
                        status: status.clone(),
                        ..record(rep, m, f64::NAN)
                    })
                    .collect(),
                matched: 0,
                full_search_empty: false,
                failed: Some(e.to_string()),
                aic: spec.methods.iter().map(|&m| (m, f64::NAN)).collect(),
            }
        }
    }
}

fn try_replication(spec: &ExperimentSpec, source: &Source<'_>, rep: usize) -> Result<ReplicationOutcome> {
    let rep_seed = spec.base_seed.wrapping_add(rep as u64);
    let (dataset, truth) = match source {
        Source::Null => {
            let cov = spec.sigma.data_covariance(spec.n)?;
            (gen_null_dataset(spec.n, spec.m, &cov, rep_seed)?, Vec::new())
        }
        Source::Power => {
            let cov = spec.sigma.data_covariance(spec.n)?;
            gen_power_dataset(spec.n, spec.m, spec.delta, &cov, rep_seed)?
        }
        Source::Real(full) => {
            let rows = subsample_rows(full.n(), spec.n, mix_seed(rep_seed, STREAM_SUBSAMPLE))?;
            let (d, dropped) = standardize(&full.select_rows(&rows)?)?;
            if !dropped.is_empty() {
                log::warn!("rep {rep}: dropped constant columns {dropped:?} in subsample");
            }
            (d, Vec::new())
        }
    };
    let sigma = spec.sigma.inference_covariance(&dataset)?;
    let config = spec.afe.clone().with_seed(mix_seed(rep_seed, STREAM_SEARCH));
    let only_matched = spec.mode == Mode::Power;
    let m = dataset.m();

    let mut records = Vec::new();
    let mut aics = Vec::new();
    let mut matched = 0;
    let mut full_search_empty = false;

    let full_methods: Vec<Method> = spec.methods.iter().copied().filter(|m| m.uses_full_search()).collect();
    if !full_methods.is_empty() {
        let searcher = AfeSearcher::new(dataset.x(), &sigma, &config)?;
        let observed = searcher.run(dataset.y())?;
        let aic_final = observed.best_node.aic;
        let tested = selected(&observed, m, &truth, only_matched);
        matched = tested.iter().filter(|t| t.matched).count();
        full_search_empty = observed.generated.is_empty();
        for &method in &full_methods {
            aics.push((method, aic_final));
            if full_search_empty {
                records.push(ReplicationRecord {
                    status: "empty".into(),
                    ..record(rep, method, aic_final)
                });
                continue;
            }
            for t in &tested {
                let start = Instant::now();
                let outcome = full_search_p(method, &searcher, &dataset, &observed, &sigma, &config, t.j);
                let mut r = ReplicationRecord {
                    j: t.j,
                    feature_key: t.key.clone(),
                    matched_true: t.matched,
                    ..record(rep, method, aic_final)
                };
                match outcome {
                    Ok((stat, p)) => {
                        r.stat = stat;
                        r.p = p;
                        r.rejected = p <= spec.alpha;
                    }
                    Err(e) => r.status = format!("error: {e}"),
                }
                r.wall_time = start.elapsed().as_secs_f64();
                records.push(r);
            }
        }
    }

    if spec.methods.contains(&Method::Ds) {
        let start = Instant::now();
        let split = data_split_test(
            &dataset,
            &sigma,
            &config,
            mix_seed(rep_seed, STREAM_SPLIT),
            &CoefficientSelection::Generated,
        )?;
        let per_test = start.elapsed().as_secs_f64() / split.features.len().max(1) as f64;
        let design = AugmentedDesign::new(dataset.x(), split.afe.generated.clone());
        let aic_final = aic(design.columns(), dataset.y(), &sigma).unwrap_or(f64::NAN);
        aics.push((Method::Ds, aic_final));
        let tested = selected(&split.afe, m, &truth, only_matched);
        if full_methods.is_empty() {
            matched = tested.iter().filter(|t| t.matched).count();
        }
        if split.afe.generated.is_empty() {
            records.push(ReplicationRecord {
                status: "empty".into(),
                ..record(rep, Method::Ds, aic_final)
            });
        }
        for t in &tested {
            let f = split
                .features
                .iter()
                .find(|f| f.j == t.j)
                .expect("every generated coefficient is tested");
            records.push(ReplicationRecord {
                j: t.j,
                feature_key: t.key.clone(),
                stat: f.stat,
                p: f.p,
                rejected: f.p <= spec.alpha,
                matched_true: t.matched,
                status: if f.singular { "singular".into() } else { "ok".into() },
                wall_time: per_test,
                ..record(rep, Method::Ds, aic_final)
            });
        }
    }

    Ok(ReplicationOutcome {
        rep,
        records,
        matched,
        full_search_empty,
        failed: None,
        aic: aics,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub tests: usize,
    pub rejections: usize,
    pub rate: f64,
    /// Binomial standard error `sqrt(rate (1 − rate) / tests)`.
    pub se: f64,
    /// Kolmogorov-Smirnov distance of the p-values from Uniform(0, 1).
    pub ks_statistic: f64,
    pub mean_aic: f64,
    /// Replications with no generated feature for this method.
    pub empty: usize,
    pub singular: usize,
    pub errors: usize,
    /// Among replications with at least one test, the share with a rejection.
    pub replication_rate: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub spec: ExperimentSpec,
    pub reps_run: usize,
    pub failed_reps: usize,
    pub empty_reps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_tests: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_reached: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rep_budget: Option<usize>,
    pub methods: Vec<MethodSummary>,
    pub wall_time_s: f64,
}

impl ExperimentSummary {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<ReplicationRecord>,
    pub summary: ExperimentSummary,
}

/// `sup |F_n(p) − p|` for p-values in `[0, 1]`.
pub fn ks_uniform(p_values: &[f64]) -> f64 {
    let mut p: Vec<f64> = p_values.to_vec();
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).max((i + 1) as f64 / n - v))
        .fold(0.0, f64::max)
}

fn summarize(
    spec: &ExperimentSpec,
    outcomes: &[ReplicationOutcome],
    wall_time: f64,
) -> ExperimentSummary {
    let methods = spec
        .methods
        .iter()
        .map(|&method| {
            let rows: Vec<&ReplicationRecord> = outcomes
                .iter()
                .flat_map(|o| &o.records)
                .filter(|r| r.method == method)
                .collect();
            let tests: Vec<&&ReplicationRecord> = rows.iter().filter(|r| r.is_test()).collect();
            let rejections = tests.iter().filter(|r| r.rejected).count();
            let rate = if tests.is_empty() { f64::NAN } else { rejections as f64 / tests.len() as f64 };
            let p: Vec<f64> = tests.iter().map(|r| r.p).collect();
            let aics: Vec<f64> = outcomes
                .iter()
                .flat_map(|o| o.aic.iter())
                .filter(|(m, a)| *m == method && a.is_finite())
                .map(|&(_, a)| a)
                .collect();
            let mut reps_tested = 0;
            let mut reps_rejected = 0;
            for o in outcomes {
                let mine: Vec<_> = o.records.iter().filter(|r| r.method == method && r.is_test()).collect();
                if !mine.is_empty() {
                    reps_tested += 1;
                    reps_rejected += mine.iter().any(|r| r.rejected) as usize;
                }
            }
            MethodSummary {
                method,
                tests: tests.len(),
                rejections,
                rate,
                se: (rate * (1.0 - rate) / tests.len() as f64).sqrt(),
                ks_statistic: if p.is_empty() { f64::NAN } else { ks_uniform(&p) },
                mean_aic: aics.iter().sum::<f64>() / aics.len() as f64,
                empty: rows.iter().filter(|r| r.status == "empty").count(),
                singular: rows.iter().filter(|r| r.status == "singular").count(),
                errors: rows.iter().filter(|r| r.status.starts_with("error")).count(),
                replication_rate: reps_rejected as f64 / reps_tested as f64,
                wall_time_s: rows.iter().map(|r| r.wall_time).sum(),
            }
        })
        .collect();
    ExperimentSummary {
        spec: spec.clone(),
        reps_run: outcomes.len(),
        failed_reps: outcomes.iter().filter(|o| o.failed.is_some()).count(),
        empty_reps: outcomes.iter().filter(|o| o.full_search_empty).count(),
        matched_tests: None,
        target_reached: None,
        rep_budget: None,
        methods,
        wall_time_s: wall_time,
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

fn run_range(
    spec: &ExperimentSpec,
    source: &Source<'_>,
    pool: &rayon::ThreadPool,
    reps: std::ops::Range<usize>,
) -> Vec<ReplicationOutcome> {
    // Source holds only shared references, so it is safe to share across
    // workers; collect keeps replication order.
    pool.install(|| {
        reps.into_par_iter()
            .map(|rep| run_replication(spec, source, rep))
            .collect()
    })
}

fn finish(spec: &ExperimentSpec, outcomes: Vec<ReplicationOutcome>, start: Instant) -> ExperimentResult {
    let summary = summarize(spec, &outcomes, start.elapsed().as_secs_f64());
    let records = outcomes.into_iter().flat_map(|o| o.records).collect();
    ExperimentResult { records, summary }
}

/// Null replications; every generated feature is tested with every method.
pub fn run_type1_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let start = Instant::now();
    let outcomes = run_range(spec, &Source::Null, &pool(spec.threads)?, 0..spec.reps);
    Ok(finish(spec, outcomes, start))
}

/// Signal replications; only generated features matching a true feature are
/// tested. Runs until `target_tests` matched tests have been collected or
/// `50 × target_tests` replications have run. `spec.reps` is ignored.
pub fn run_power_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let start = Instant::now();
    let pool = pool(spec.threads)?;
    let budget = POWER_BUDGET_FACTOR * spec.target_tests;
    let mut outcomes = Vec::new();
    let mut matched = 0;
    let mut next = 0;
    'batches: while next < budget {
        let end = (next + POWER_BATCH).min(budget);
        for outcome in run_range(spec, &Source::Power, &pool, next..end) {
            matched += outcome.matched;
            outcomes.push(outcome);
            if matched >= spec.target_tests {
                break 'batches;
            }
        }
        next = end;
    }
    let mut result = finish(spec, outcomes, start);
    result.summary.matched_tests = Some(matched);
    result.summary.target_reached = Some(matched >= spec.target_tests);
    result.summary.rep_budget = Some(budget);
    Ok(result)
}

/// Seeded subsamples of `n` rows from `data`, standardized per subsample.
pub fn run_realdata_experiment(data: &Dataset, spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let mut spec = spec.clone();
    spec.m = data.m();
    spec.validate()?;
    if spec.n > data.n() {
        return Err(Error::InvalidConfig(format!(
            "subsample size {} exceeds the {} rows available",
            spec.n,
            data.n()
        )));
    }
    let start = Instant::now();
    let outcomes = run_range(&spec, &Source::Real(data), &pool(spec.threads)?, 0..spec.reps);
    Ok(finish(&spec, outcomes, start))
}
