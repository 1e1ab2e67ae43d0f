//! Linear-model primitives: GLS residual operators, AIC, least squares and
//! test directions.

use nalgebra::{ColPivQR, DMatrix, DVector, QR};

use super::covariance::CovarianceModel;
use super::normal;
use crate::afe::Expr;
use crate::error::{Error, Result};

/// Relative decay of the pivoted-QR diagonal below which a design is treated
/// as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// A regression dataset with fixed design `x` (n×m) and response `y`.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::DimensionMismatch(
                "dataset needs at least one row and one column".into(),
            ));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("dataset contains non-finite values".into()));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(self.x.clone(), y)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let x = self.x.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        Self::new(x, y)
    }
}

/// Design after appending generated features: `X_F = [X, F]`.
#[derive(Debug, Clone)]
pub struct AugmentedDesign {
    m: usize,
    generated: Vec<Expr>,
    columns: DMatrix<f64>,
}

impl AugmentedDesign {
    pub fn new(base: &DMatrix<f64>, generated: Vec<Expr>) -> Self {
        let (n, m) = base.shape();
        let mut columns = DMatrix::zeros(n, m + generated.len());
        columns.columns_mut(0, m).copy_from(base);
        for (k, expr) in generated.iter().enumerate() {
            columns.set_column(m + k, &expr.evaluate(base));
        }
        Self {
            m,
            generated,
            columns,
        }
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn generated(&self) -> &[Expr] {
        &self.generated
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.generated.len()
    }
}

/// Numerical rank from a column-pivoted QR with relative diagonal threshold.
pub fn numerical_rank(v: &DMatrix<f64>) -> usize {
    let p = v.ncols();
    if p == 0 {
        return 0;
    }
    if v.nrows() < p {
        return numerical_rank(&v.transpose());
    }
    let r = ColPivQR::new(v.clone()).r();
    let lead = r[(0, 0)].abs();
    if !(lead > 0.0) {
        return 0;
    }
    (0..p).take_while(|&k| r[(k, k)].abs() > RANK_TOL * lead).count()
}

pub fn ensure_full_rank(v: &DMatrix<f64>) -> Result<()> {
    let rank = numerical_rank(v);
    if rank < v.ncols() {
        return Err(Error::SingularDesign {
            rank,
            cols: v.ncols(),
        });
    }
    Ok(())
}

/// The GLS residual operator `Λ = Σ⁻¹ − Σ⁻¹V(VᵀΣ⁻¹V)⁻¹VᵀΣ⁻¹`, held in
/// factored form as `L⁻ᵀ(I − QQᵀ)L⁻¹` with `Q` an orthonormal basis of the
/// whitened columns.
#[derive(Debug, Clone)]
pub struct ResidualOperator {
    cov: CovarianceModel,
    q: DMatrix<f64>,
}

impl ResidualOperator {
    pub fn cols(&self) -> usize {
        self.q.ncols()
    }

    /// `(I − QQᵀ) L⁻¹ v`.
    pub fn whitened_residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let w = self.cov.whiten(v);
        if self.q.ncols() == 0 {
            return w;
        }
        let coef = self.q.tr_mul(&w);
        w - &self.q * coef
    }

    /// `Λ v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let u = self.whitened_residual(v);
        // L⁻ᵀ u = Σ⁻¹ L u
        self.cov.solve(&self.cov.apply_factor(&u))
    }

    /// `vᵀ Λ v`.
    pub fn quadratic(&self, v: &DVector<f64>) -> f64 {
        self.whitened_residual(v).norm_squared()
    }

    /// `uᵀ Λ v`.
    pub fn bilinear(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.whitened_residual(u).dot(&self.whitened_residual(v))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.cov.dim();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            out.set_column(j, &self.apply(&e));
        }
        out
    }
}

pub fn gls_residual_operator(v: &DMatrix<f64>, sigma: &CovarianceModel) -> Result<ResidualOperator> {
    let n = sigma.dim();
    if v.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "column matrix has {} rows, covariance dimension is {n}",
            v.nrows()
        )));
    }
    let whitened = sigma.whiten_matrix(v);
    ensure_full_rank(&whitened)?;
    let q = if v.ncols() == 0 {
        DMatrix::zeros(n, 0)
    } else {
        QR::new(whitened).q()
    };
    Ok(ResidualOperator {
        cov: sigma.clone(),
        q,
    })
}

/// `AIC(V, y) = yᵀΛ_V y + 2|V|`.
pub fn aic(v: &DMatrix<f64>, y: &DVector<f64>, sigma: &CovarianceModel) -> Result<f64> {
    let op = gls_residual_operator(v, sigma)?;
    Ok(op.quadratic(y) + 2.0 * v.ncols() as f64)
}

struct LeastSquares {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquares {
    fn new(x: &DMatrix<f64>) -> Result<Self> {
        ensure_full_rank(x)?;
        let qr = QR::new(x.clone());
        Ok(Self {
            q: qr.q(),
            r: qr.r(),
        })
    }
}

/// Ordinary least-squares coefficients `(X_FᵀX_F)⁻¹X_Fᵀy`.
pub fn fit_beta(design: &AugmentedDesign, y: &DVector<f64>) -> Result<DVector<f64>> {
    ols(design.columns(), y)
}

pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let ls = LeastSquares::new(x)?;
    let qty = ls.q.tr_mul(y);
    ls.r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign {
            rank: 0,
            cols: x.ncols(),
        })
}

/// Direction `η_j` with `η_jᵀy = β̂_j`, and its variance `η_jᵀΣη_j`.
#[derive(Debug, Clone)]
pub struct TestDirection {
    pub eta: DVector<f64>,
    /// 1-based coefficient index over the `m + k` columns.
    pub j: usize,
    pub sigma_eta_sq: f64,
}

pub fn test_direction(
    design: &AugmentedDesign,
    j: usize,
    sigma: &CovarianceModel,
) -> Result<TestDirection> {
    direction_for_columns(design.columns(), j, sigma)
}

pub(crate) fn direction_for_columns(
    x: &DMatrix<f64>,
    j: usize,
    sigma: &CovarianceModel,
) -> Result<TestDirection> {
    let p = x.ncols();
    if j == 0 || j > p {
        return Err(Error::IndexOutOfRange { index: j, len: p });
    }
    let ls = LeastSquares::new(x)?;
    let mut e = DVector::zeros(p);
    e[j - 1] = 1.0;
    // η = Q R⁻ᵀ e_j
    let w = ls
        .r
        .transpose()
        .solve_lower_triangular(&e)
        .ok_or(Error::SingularDesign { rank: 0, cols: p })?;
    let eta = &ls.q * w;
    let sigma_eta_sq = eta.dot(&sigma.apply(&eta));
    if !(sigma_eta_sq > 0.0) {
        return Err(Error::InvalidDirection);
    }
    Ok(TestDirection {
        eta,
        j,
        sigma_eta_sq,
    })
}

/// Two-sided z-test p-value `2(1 − Φ(|t|/σ))`.
pub fn classical_z_p_value(t: f64, sigma_eta_sq: f64) -> Result<f64> {
    if !(sigma_eta_sq.is_finite() && sigma_eta_sq > 0.0) {
        return Err(Error::InvalidVariance(sigma_eta_sq));
    }
    Ok((2.0 * normal::sf(t.abs() / sigma_eta_sq.sqrt())).min(1.0))
}
