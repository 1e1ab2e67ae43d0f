//! Linear-model and Gaussian primitives shared by the search and the tests.

pub mod basis;
pub mod covariance;
pub mod linear;
pub mod normal;

pub use covariance::{CovarianceKind, CovarianceModel};
pub use linear::{
    aic, classical_z_p_value, fit_beta, gls_residual_operator, test_direction, AugmentedDesign,
    Dataset, ResidualOperator, TestDirection,
};
