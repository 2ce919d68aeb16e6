//! Factorial audit-study toolkit: treatment design, latent-index respondent
//! simulation, and the estimators used to separate level shifts from
//! variance differences in callback data.

pub mod catalog;
pub mod demo;
pub mod design;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod optimize;
pub mod panel;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Panel64 = panel::Panel<f64>;
pub type Panel32 = panel::Panel<f32>;
pub type Fit64 = estimators::FitResult<f64>;
pub type Fit32 = estimators::FitResult<f32>;
pub type HetProbit64 = estimators::HetProbitResult<f64>;
pub type HetProbit32 = estimators::HetProbitResult<f32>;
pub type Matrix64 = linalg::Matrix<f64>;
