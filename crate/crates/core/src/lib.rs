//! Dynamic factor models for multivariate time series: a frequency-domain
//! adequacy test, three loading estimators, and additive-outlier detection
//! by projection onto the complement of the factor space.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common case.

// Comparisons are written so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adequacy;
pub mod datamodel;
pub mod error;
pub mod factors;
pub mod json;
pub mod moments;
pub mod outliers;
pub mod scalar;
pub mod simulation;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Series = datamodel::MultiSeries<f64>;
pub type Series32 = datamodel::MultiSeries<f32>;
pub type LagCov = moments::LagCovSet<f64>;
pub type Spectrum = moments::SpectralSet<f64>;
pub type Eigen = moments::EigenSystem<f64>;
