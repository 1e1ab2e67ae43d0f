//! Decomposition of the response along the test direction.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::stats::CovarianceModel;

/// `y = a + b·z` with `z = ηᵀy`, `b = Ση/ηᵀΣη` and `a` the nuisance part.
#[derive(Debug, Clone)]
pub struct LineParameterization {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub z_obs: f64,
    pub sigma_eta_sq: f64,
}

impl LineParameterization {
    /// The response at line parameter `z`.
    pub fn at(&self, z: f64) -> DVector<f64> {
        &self.a + &self.b * z
    }

    pub fn sigma_eta(&self) -> f64 {
        self.sigma_eta_sq.sqrt()
    }
}

pub fn nuisance_decompose(
    y: &DVector<f64>,
    eta: &DVector<f64>,
    sigma: &CovarianceModel,
) -> Result<LineParameterization> {
    if y.len() != eta.len() || y.len() != sigma.dim() {
        return Err(Error::DimensionMismatch(
            "response, direction and covariance sizes differ".into(),
        ));
    }
    if eta.iter().all(|&v| v == 0.0) || eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDirection);
    }
    let sigma_eta = sigma.apply(eta);
    let s = eta.dot(&sigma_eta);
    if !(s > 0.0) {
        return Err(Error::InvalidDirection);
    }
    let b = sigma_eta / s;
    let z_obs = eta.dot(y);
    let a = y - &b * z_obs;
    Ok(LineParameterization {
        a,
        b,
        z_obs,
        sigma_eta_sq: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_direction_example() {
        let y = DVector::from_vec(vec![2.0, 3.0]);
        let eta = DVector::from_vec(vec![1.0, 0.0]);
        let line = nuisance_decompose(&y, &eta, &CovarianceModel::identity(2)).unwrap();
        assert_eq!(line.b, eta);
        assert_eq!(line.a, DVector::from_vec(vec![0.0, 3.0]));
        assert_eq!(line.z_obs, 2.0);
    }

    #[test]
    fn invariants_under_ar_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cov = CovarianceModel::ar_power(8, 0.5).unwrap();
        for _ in 0..20 {
            let y = DVector::from_fn(8, |_, _| rng.random_range(-3.0..3.0));
            let eta = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
            let line = nuisance_decompose(&y, &eta, &cov).unwrap();
            assert!(eta.dot(&line.a).abs() < 1e-10 * y.norm().max(1.0));
            assert!((eta.dot(&line.b) - 1.0).abs() < 1e-10);
            assert!((line.at(line.z_obs) - &y).norm() < 1e-12 * y.norm());
        }
    }

    #[test]
    fn zero_direction_is_rejected() {
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let err = nuisance_decompose(&y, &DVector::zeros(2), &CovarianceModel::identity(2));
        assert!(matches!(err, Err(Error::InvalidDirection)));
    }
}
