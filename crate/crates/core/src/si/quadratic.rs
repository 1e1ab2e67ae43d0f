//! Quadratic inequalities in the line parameter.

use nalgebra::DMatrix;

use super::interval::IntervalSet;
use super::line::LineParameterization;
use crate::error::Result;
use crate::stats::linear::gls_residual_operator;
use crate::stats::CovarianceModel;

/// Leading-coefficient threshold used when none is supplied.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-12;

/// `c2·r² + c1·r + c0 ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticInequality {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl QuadraticInequality {
    pub fn new(c2: f64, c1: f64, c0: f64) -> Self {
        Self { c2, c1, c0 }
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.c2 * r + self.c1) * r + self.c0
    }

    pub fn negate(&self) -> Self {
        Self::new(-self.c2, -self.c1, -self.c0)
    }

    pub fn solve(&self) -> IntervalSet {
        solve_quadratic_leq(self, DEFAULT_DEGENERACY_TOL)
    }
}

/// Exact solution set of `q ≤ 0` as at most two intervals. Leading
/// coefficients below `tol` relative to the others are treated as zero.
pub fn solve_quadratic_leq(q: &QuadraticInequality, tol: f64) -> IntervalSet {
    let QuadraticInequality { c2, c1, c0 } = *q;
    let inf = f64::INFINITY;
    if c2.abs() <= tol * c1.abs().max(c0.abs()).max(1.0) {
        if c1.abs() <= tol * c0.abs().max(1.0) {
            return if c0 <= 0.0 {
                IntervalSet::real_line()
            } else {
                IntervalSet::empty()
            };
        }
        let root = -c0 / c1;
        return if c1 > 0.0 {
            IntervalSet::interval(-inf, root)
        } else {
            IntervalSet::interval(root, inf)
        };
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return if c2 > 0.0 {
            IntervalSet::empty()
        } else {
            IntervalSet::real_line()
        };
    }
    let sq = disc.sqrt();
    let t = -0.5 * (c1 + c1.signum() * sq);
    let (mut r1, mut r2) = if t == 0.0 {
        (0.0, 0.0)
    } else {
        (t / c2, c0 / t)
    };
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    if c2 > 0.0 {
        IntervalSet::interval(r1, r2)
    } else {
        IntervalSet::from_intervals(vec![(-inf, r1), (r2, inf)])
    }
}

/// Coefficients of `AIC(V, a + b r) = c2 r² + c1 r + c0` for one feature set.
pub fn aic_polynomial(
    columns: &DMatrix<f64>,
    line: &LineParameterization,
    sigma: &CovarianceModel,
) -> Result<QuadraticInequality> {
    let op = gls_residual_operator(columns, sigma)?;
    let ra = op.whitened_residual(&line.a);
    let rb = op.whitened_residual(&line.b);
    Ok(QuadraticInequality::new(
        rb.norm_squared(),
        2.0 * ra.dot(&rb),
        ra.norm_squared() + 2.0 * columns.ncols() as f64,
    ))
}

/// `AIC(V_i, a+br) − AIC(V_j, a+br) ≤ 0` as a quadratic in `r`.
pub fn comparison_to_quadratic(
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
    line: &LineParameterization,
    sigma: &CovarianceModel,
) -> Result<QuadraticInequality> {
    let l = aic_polynomial(left, line, sigma)?;
    let r = aic_polynomial(right, line, sigma)?;
    Ok(QuadraticInequality::new(l.c2 - r.c2, l.c1 - r.c1, l.c0 - r.c0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(c2: f64, c1: f64, c0: f64) -> IntervalSet {
        QuadraticInequality::new(c2, c1, c0).solve()
    }

    #[test]
    fn textbook_cases() {
        let inf = f64::INFINITY;
        assert_eq!(solve(1.0, 0.0, -1.0).intervals(), &[(-1.0, 1.0)]);
        assert_eq!(solve(-1.0, 0.0, 1.0).intervals(), &[(-inf, -1.0), (1.0, inf)]);
        assert_eq!(solve(0.0, 2.0, -4.0).intervals(), &[(-inf, 2.0)]);
        assert_eq!(solve(0.0, -2.0, -4.0).intervals(), &[(-2.0, inf)]);
        assert!(solve(0.0, 0.0, 1.0).is_empty());
        assert_eq!(solve(0.0, 0.0, -1.0).intervals(), &[(-inf, inf)]);
        assert!(solve(1.0, 0.0, 1.0).is_empty());
        assert_eq!(solve(-1.0, 0.0, -1.0).intervals(), &[(-inf, inf)]);
    }

    #[test]
    fn roots_are_accurate_when_cancellation_threatens() {
        // roots 1e-8 and 1e8
        let s = solve(1.0, -(1e8 + 1e-8), 1.0);
        let (lo, hi) = s.intervals()[0];
        assert!((lo - 1e-8).abs() < 1e-20);
        assert!((hi - 1e8).abs() < 1e-6);
    }
}
