//! Selective inference for features produced by a directed tree-search
//! auto feature engineering (AFE) procedure.
//!
//! The crate is organised bottom-up:
//!
//! - [`stats`]: covariance models, GLS residual operators, AIC, least squares,
//!   test directions and Gaussian tail numerics.
//! - [`afe`]: feature expressions and the seeded tree search, which records
//!   every response-dependent AIC comparison in a [`afe::ComparisonTrace`].
//! - [`si`]: nuisance decomposition, quadratic inequalities, interval algebra,
//!   the parametric line search for the truncation set and selective p-values.
//! - [`baselines`]: over-conditioning, naive, Bonferroni and data splitting.
//! - [`harness`]: data generation and Monte-Carlo experiments.

pub mod afe;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod report;
pub mod si;
pub mod stats;

pub use error::{Error, Result};
