//! Synthetic data generation, CSV ingest and preprocessing.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::afe::{Expr, SearchRng, UnaryOp};
use crate::error::{Error, Result};
use crate::stats::linear::{numerical_rank, ols};
use crate::stats::{CovarianceModel, Dataset};

fn draw_design(n: usize, m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    // row-major draw order
    let mut x = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            x[(i, j)] = StandardNormal.sample(rng);
        }
    }
    x
}

fn draw_noise(sigma: &CovarianceModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let e = DVector::from_fn(sigma.dim(), |_, _| StandardNormal.sample(rng));
    sigma.apply_factor(&e)
}

/// `X_ij ~ N(0, 1)` and `y ~ N(0, Σ)`, independent.
pub fn gen_null_dataset(n: usize, m: usize, sigma: &CovarianceModel, seed: u64) -> Result<Dataset> {
    check_dims(n, m, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = draw_design(n, m, &mut rng);
    let y = draw_noise(sigma, &mut rng);
    Dataset::new(x, y)
}

fn check_dims(n: usize, m: usize, sigma: &CovarianceModel) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig("n and m must be positive".into()));
    }
    if sigma.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "covariance has dimension {}, expected {n}",
            sigma.dim()
        )));
    }
    Ok(())
}

/// The four signal features: `expc(x2)`, `mul(x4, expc(x2))`,
/// `sin(expc(x2))` and `sqrtabs(mul(x4, expc(x2)))`.
pub fn true_features() -> Vec<Expr> {
    let e2 = Expr::unary(UnaryOp::ExpClamped, Expr::leaf(1));
    let prod = Expr::mul(Expr::leaf(3), e2.clone());
    vec![
        e2.clone(),
        prod.clone(),
        Expr::unary(UnaryOp::Sin, e2),
        Expr::unary(UnaryOp::SqrtAbs, prod),
    ]
}

/// `y = Δ Σ_t f_t(X) + ε` with `ε ~ N(0, Σ)`. Returns the dataset and the
/// canonical keys of the true features.
pub fn gen_power_dataset(
    n: usize,
    m: usize,
    delta: f64,
    sigma: &CovarianceModel,
    seed: u64,
) -> Result<(Dataset, Vec<String>)> {
    if m < 4 {
        return Err(Error::InvalidConfig(format!("power data needs m >= 4, got {m}")));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidConfig(format!("delta must be finite and >= 0, got {delta}")));
    }
    check_dims(n, m, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = draw_design(n, m, &mut rng);
    let noise = draw_noise(sigma, &mut rng);
    let truth = true_features();
    let mut signal = DVector::zeros(n);
    for f in &truth {
        signal += f.evaluate(&x);
    }
    let y = signal * delta + noise;
    let keys = truth.iter().map(|f| f.key().to_string()).collect();
    Ok((Dataset::new(x, y)?, keys))
}

/// `σ̂² = ‖y − X(XᵀX)⁻¹Xᵀy‖² / (n − m)`.
pub fn estimate_variance(dataset: &Dataset) -> Result<f64> {
    let (n, m) = (dataset.n(), dataset.m());
    if n <= m {
        return Err(Error::InvalidConfig(format!("variance estimate needs n > m, got n = {n}, m = {m}")));
    }
    let rank = numerical_rank(dataset.x());
    if rank < m {
        return Err(Error::SingularDesign { rank, cols: m });
    }
    let beta = ols(dataset.x(), dataset.y())?;
    let resid = dataset.y() - dataset.x() * beta;
    Ok(resid.norm_squared() / (n - m) as f64)
}

/// Sorted row indices of a seeded uniform subsample without replacement.
pub fn subsample_rows(total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > total {
        return Err(Error::InvalidConfig(format!(
            "subsample size {n} exceeds the {total} available rows"
        )));
    }
    let mut rows = SearchRng::new(seed).permutation(total);
    rows.truncate(n);
    rows.sort_unstable();
    Ok(rows)
}

fn mean_sd(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let ss: f64 = v.map(|a| (a - mean) * (a - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Z-scores every column of `X` and `y` (sample standard deviation). Columns
/// that are constant are dropped; their original indices are returned.
pub fn standardize(dataset: &Dataset) -> Result<(Dataset, Vec<usize>)> {
    let x = dataset.x();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..x.ncols() {
        let (mean, sd) = mean_sd(x.column(j).iter().copied());
        if sd > 0.0 && sd.is_finite() {
            kept.push(x.column(j).map(|v| (v - mean) / sd));
        } else {
            dropped.push(j);
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidConfig("every feature column is constant".into()));
    }
    let (mean, sd) = mean_sd(dataset.y().iter().copied());
    if !(sd > 0.0) {
        return Err(Error::InvalidConfig("response is constant".into()));
    }
    let y = dataset.y().map(|v| (v - mean) / sd);
    Ok((Dataset::new(DMatrix::from_columns(&kept), y)?, dropped))
}

/// A regression table read from CSV.
#[derive(Debug, Clone)]
pub struct CsvData {
    pub dataset: Dataset,
    pub feature_names: Vec<String>,
    pub target: String,
    /// Data rows (1-based) skipped for missing values.
    pub dropped_rows: Vec<usize>,
    /// Constant feature columns that were removed.
    pub dropped_columns: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "null" | "NULL")
}

/// Reads a CSV with a header row. `target` names the response column and every
/// other column becomes a feature. Rows with missing cells are dropped; any
/// other non-numeric cell is an error.
pub fn load_csv(path: impl AsRef<Path>, target: &str) -> Result<CsvData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::InvalidConfig(format!("no column named '{target}'")))?;
    let feature_idx: Vec<usize> = (0..headers.len()).filter(|&c| c != target_idx).collect();
    if feature_idx.is_empty() {
        return Err(Error::InvalidConfig("no feature columns besides the target".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped_rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        let mut values = Vec::with_capacity(headers.len());
        let mut missing = false;
        for (c, cell) in record.iter().enumerate() {
            if is_missing(cell) {
                missing = true;
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::Ingest {
                        row: row_no,
                        column: headers[c].clone(),
                        message: format!("non-numeric value '{cell}'"),
                    })
                }
            }
        }
        if missing {
            dropped_rows.push(row_no);
        } else {
            rows.push(values);
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no complete data rows".into()));
    }

    let n = rows.len();
    let mut cols = Vec::new();
    let mut feature_names = Vec::new();
    let mut dropped_columns = Vec::new();
    for &c in &feature_idx {
        let col = DVector::from_iterator(n, rows.iter().map(|r| r[c]));
        if col.iter().all(|&v| v == col[0]) {
            log::warn!("dropping constant column '{}'", headers[c]);
            dropped_columns.push(headers[c].clone());
        } else {
            cols.push(col);
            feature_names.push(headers[c].clone());
        }
    }
    if cols.is_empty() {
        return Err(Error::InvalidConfig("every feature column is constant".into()));
    }
    let y = DVector::from_iterator(n, rows.iter().map(|r| r[target_idx]));
    Ok(CsvData {
        dataset: Dataset::new(DMatrix::from_columns(&cols), y)?,
        feature_names,
        target: target.to_string(),
        dropped_rows,
        dropped_columns,
    })
}
