//! Known noise covariance models with factorization-based services.
//!
//! Every model exposes a lower-triangular factor `L` with `Σ = L Lᵀ`. Whitening
//! (`L⁻¹ v`) is the workhorse: GLS quadratic forms become Euclidean norms of
//! whitened vectors.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CovarianceKind {
    Identity,
    ScaledIdentity { variance: f64 },
    /// `Σ_ij = ρ^|i-j|`.
    ArPower { rho: f64 },
    Dense,
}

#[derive(Debug, Clone)]
pub struct CovarianceModel {
    kind: CovarianceKind,
    n: usize,
    dense: Option<DenseFactor>,
}

#[derive(Debug, Clone)]
struct DenseFactor {
    sigma: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl CovarianceModel {
    pub fn identity(n: usize) -> Self {
        Self {
            kind: CovarianceKind::Identity,
            n,
            dense: None,
        }
    }

    pub fn scaled_identity(n: usize, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::InvalidVariance(variance));
        }
        Ok(Self {
            kind: CovarianceKind::ScaledIdentity { variance },
            n,
            dense: None,
        })
    }

    pub fn ar_power(n: usize, rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho.abs() < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ar-power correlation must lie in (-1, 1), got {rho}"
            )));
        }
        Ok(Self {
            kind: CovarianceKind::ArPower { rho },
            n,
            dense: None,
        })
    }

    pub fn dense(sigma: DMatrix<f64>) -> Result<Self> {
        let n = sigma.nrows();
        if sigma.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square, got {}x{}",
                n,
                sigma.ncols()
            )));
        }
        let scale = sigma.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        let chol = Cholesky::new(sigma.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            kind: CovarianceKind::Dense,
            n,
            dense: Some(DenseFactor { sigma, chol }),
        })
    }

    pub fn kind(&self) -> CovarianceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// True when Σ is a positive multiple of the identity, in which case
    /// whitening does not change orthonormal bases of column spans.
    pub fn is_isotropic(&self) -> bool {
        matches!(
            self.kind,
            CovarianceKind::Identity | CovarianceKind::ScaledIdentity { .. }
        )
    }

    fn check_len(&self, len: usize) {
        assert_eq!(len, self.n, "vector length does not match covariance dimension");
    }

    /// Overwrites `v` with `L⁻¹ v`.
    pub fn whiten_in_place(&self, v: &mut [f64]) {
        self.check_len(v.len());
        match self.kind {
            CovarianceKind::Identity => {}
            CovarianceKind::ScaledIdentity { variance } => {
                let s = variance.sqrt();
                v.iter_mut().for_each(|x| *x /= s);
            }
            CovarianceKind::ArPower { rho } => {
                let s = (1.0 - rho * rho).sqrt();
                for i in (1..v.len()).rev() {
                    v[i] = (v[i] - rho * v[i - 1]) / s;
                }
            }
            CovarianceKind::Dense => {
                let l = self.dense.as_ref().unwrap().chol.l_dirty();
                // forward substitution on the lower factor
                for i in 0..v.len() {
                    let mut acc = v[i];
                    for j in 0..i {
                        acc -= l[(i, j)] * v[j];
                    }
                    v[i] = acc / l[(i, i)];
                }
            }
        }
    }

    pub fn whiten(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        self.whiten_in_place(out.as_mut_slice());
        out
    }

    pub fn whiten_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for mut col in out.column_iter_mut() {
            self.whiten_in_place(col.as_mut_slice());
        }
        out
    }

    /// `L v`: maps standard normal draws to draws from N(0, Σ).
    pub fn apply_factor(&self, v: &DVector<f64>) -> DVector<f64> {
        self.check_len(v.len());
        let mut out = v.clone();
        match self.kind {
            CovarianceKind::Identity => {}
            CovarianceKind::ScaledIdentity { variance } => out *= variance.sqrt(),
            CovarianceKind::ArPower { rho } => {
                let s = (1.0 - rho * rho).sqrt();
                for i in 1..out.len() {
                    out[i] = rho * out[i - 1] + s * v[i];
                }
            }
            CovarianceKind::Dense => {
                out = self.dense.as_ref().unwrap().chol.l() * v;
            }
        }
        out
    }

    /// `Σ v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.check_len(v.len());
        match self.kind {
            CovarianceKind::Identity => v.clone(),
            CovarianceKind::ScaledIdentity { variance } => v * variance,
            CovarianceKind::ArPower { rho } => {
                // Σ v = L (Lᵀ v); Lᵀ v solves (L⁻¹)ᵀ w = v, an upper bidiagonal system.
                let n = v.len();
                if n == 0 {
                    return v.clone();
                }
                let s = (1.0 - rho * rho).sqrt();
                let diag = |i: usize| if i == 0 { 1.0 } else { 1.0 / s };
                let mut w = DVector::zeros(n);
                w[n - 1] = v[n - 1] / diag(n - 1);
                for i in (0..n - 1).rev() {
                    w[i] = (v[i] + rho / s * w[i + 1]) / diag(i);
                }
                self.apply_factor(&w)
            }
            CovarianceKind::Dense => &self.dense.as_ref().unwrap().sigma * v,
        }
    }

    /// `Σ⁻¹ v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.check_len(v.len());
        match self.kind {
            CovarianceKind::Identity => v.clone(),
            CovarianceKind::ScaledIdentity { variance } => v / variance,
            CovarianceKind::ArPower { rho } => {
                let n = v.len();
                let s = (1.0 - rho * rho).sqrt();
                let u = self.whiten(v);
                // (L⁻¹)ᵀ u
                let mut out = DVector::zeros(n);
                for i in 0..n {
                    let d = if i == 0 { 1.0 } else { 1.0 / s };
                    out[i] = d * u[i] - if i + 1 < n { rho / s * u[i + 1] } else { 0.0 };
                }
                out
            }
            CovarianceKind::Dense => self.dense.as_ref().unwrap().chol.solve(v),
        }
    }

    /// `vᵀ Σ⁻¹ v`.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        self.whiten(v).norm_squared()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self.kind {
            CovarianceKind::Identity => DMatrix::identity(self.n, self.n),
            CovarianceKind::ScaledIdentity { variance } => {
                DMatrix::identity(self.n, self.n) * variance
            }
            CovarianceKind::ArPower { rho } => DMatrix::from_fn(self.n, self.n, |i, j| {
                rho.powi((i as i32 - j as i32).abs())
            }),
            CovarianceKind::Dense => self.dense.as_ref().unwrap().sigma.clone(),
        }
    }

    /// Covariance of the sub-vector at `indices`. Isotropic kinds keep their
    /// structure; an ar-power model keeps it only for a contiguous run.
    pub fn principal_submatrix(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(Error::DimensionMismatch(format!(
                "index {bad} outside covariance of dimension {}",
                self.n
            )));
        }
        let k = indices.len();
        match self.kind {
            CovarianceKind::Identity => Ok(Self::identity(k)),
            CovarianceKind::ScaledIdentity { variance } => Self::scaled_identity(k, variance),
            CovarianceKind::ArPower { rho }
                if indices.windows(2).all(|w| w[1] == w[0] + 1) =>
            {
                Self::ar_power(k, rho)
            }
            _ => {
                let full = self.to_dense();
                Self::dense(DMatrix::from_fn(k, k, |i, j| full[(indices[i], indices[j])]))
            }
        }
    }
}
