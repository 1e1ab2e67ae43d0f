//! Truncated-normal masses and selective p-values, evaluated in log space.

use super::interval::IntervalSet;
use crate::error::{Error, Result};
use crate::stats::normal::{log_mass, log_sum_exp};

fn check_variance(sigma_sq: f64) -> Result<f64> {
    if sigma_sq.is_finite() && sigma_sq > 0.0 {
        Ok(sigma_sq.sqrt())
    } else {
        Err(Error::InvalidVariance(sigma_sq))
    }
}

/// `ln P(U ∈ Z)` for `U ~ N(mu, sigma_sq)`.
pub fn log_truncated_normal_mass(z: &IntervalSet, mu: f64, sigma_sq: f64) -> Result<f64> {
    let sd = check_variance(sigma_sq)?;
    let parts: Vec<f64> = z
        .intervals()
        .iter()
        .map(|&(lo, hi)| log_mass((lo - mu) / sd, (hi - mu) / sd))
        .collect();
    Ok(log_sum_exp(&parts))
}

/// `P(U ∈ Z)` for `U ~ N(mu, sigma_sq)`.
pub fn truncated_normal_mass(z: &IntervalSet, mu: f64, sigma_sq: f64) -> Result<f64> {
    let mass = log_truncated_normal_mass(z, mu, sigma_sq)?.exp();
    if mass > 0.0 {
        Ok(mass.min(1.0))
    } else {
        Err(Error::ZeroTruncationMass)
    }
}

/// Two-sided p-value of `z_obs` under `N(0, sigma_sq)` truncated to `Z`.
pub fn selective_p_value(z_obs: f64, z: &IntervalSet, sigma_sq: f64) -> Result<f64> {
    check_variance(sigma_sq)?;
    let log_den = log_truncated_normal_mass(z, 0.0, sigma_sq)?;
    if log_den == f64::NEG_INFINITY {
        return Err(Error::ZeroTruncationMass);
    }
    if z_obs == 0.0 {
        return Ok(1.0);
    }
    let tail = z.intersect(&IntervalSet::outside_symmetric(z_obs));
    let log_num = log_truncated_normal_mass(&tail, 0.0, sigma_sq)?;
    Ok((log_num - log_den).exp().clamp(0.0, 1.0))
}
