//! Conditional inference for generated features.

pub mod interval;
pub mod line;
pub mod parametric;
pub mod quadratic;
pub mod truncated;

use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

pub use interval::IntervalSet;
pub use line::{nuisance_decompose, LineParameterization};
pub use parametric::{interval_for_z, parametric_search, parametric_search_with, ParametricOutcome};
pub use quadratic::{comparison_to_quadratic, solve_quadratic_leq, QuadraticInequality};
pub use truncated::{selective_p_value, truncated_normal_mass};

use crate::afe::{AfeResult, AfeSearcher};
use crate::error::Result;
use crate::stats::linear::{direction_for_columns, TestDirection};
use crate::stats::AugmentedDesign;

#[derive(Debug, Clone, Serialize)]
pub struct SelectiveTestResult {
    /// 1-based coefficient index over `m + k` columns.
    pub j: usize,
    pub feature: String,
    /// `β̂_j`.
    pub stat: f64,
    pub sigma_eta_sq: f64,
    pub p_selective: f64,
    #[serde(rename = "intervals")]
    pub z_set: IntervalSet,
    #[serde(skip)]
    pub observed_interval: (f64, f64),
    pub n_afe_calls: usize,
    #[serde(rename = "wall_time_s")]
    pub wall_time: f64,
}

/// Test direction and line for coefficient `j` of `[X, F]`, where `F` are the
/// features generated in `observed`.
pub fn prepare_line(
    searcher: &AfeSearcher,
    y: &DVector<f64>,
    observed: &AfeResult,
    j: usize,
) -> Result<(TestDirection, LineParameterization, AugmentedDesign)> {
    let design = AugmentedDesign::new(searcher.x(), observed.generated.clone());
    let direction = direction_for_columns(design.columns(), j, searcher.covariance())?;
    let line = nuisance_decompose(y, &direction.eta, searcher.covariance())?;
    Ok((direction, line, design))
}

pub fn feature_label(design: &AugmentedDesign, j: usize) -> String {
    if j <= design.m() {
        format!("x{j}")
    } else {
        design.generated()[j - design.m() - 1].key().to_string()
    }
}

/// The proposed test for coefficient `j` given the observed search result.
pub fn selective_test(
    searcher: &AfeSearcher,
    y: &DVector<f64>,
    observed: &AfeResult,
    j: usize,
) -> Result<SelectiveTestResult> {
    let start = Instant::now();
    let (direction, line, design) = prepare_line(searcher, y, observed, j)?;
    let outcome = parametric_search_with(searcher, &line, &observed.key_set())?;
    let p = selective_p_value(line.z_obs, &outcome.z_set, line.sigma_eta_sq)?;
    Ok(SelectiveTestResult {
        j,
        feature: feature_label(&design, j),
        stat: line.z_obs,
        sigma_eta_sq: direction.sigma_eta_sq,
        p_selective: p,
        z_set: outcome.z_set,
        observed_interval: outcome.observed_interval,
        n_afe_calls: outcome.n_afe_calls,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
