//! Simulation, estimation and prediction for Hilbertian autoregressive
//! processes of order one.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod empirical;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod gaussian_theory;
pub mod linalg;
pub mod metrics;
pub mod quadrature;
pub mod reference;
pub mod rng;
pub mod scalar;
pub mod simulator;
pub mod smoothing;
pub mod spectral_model;
pub mod wavelet;

pub use error::{Error, Result};
pub use scalar::Real;

pub type OperatorModel64 = spectral_model::OperatorModel<f64>;
pub type OperatorModel32 = spectral_model::OperatorModel<f32>;
pub type CoefficientSeries64 = simulator::CoefficientSeries<f64>;
pub type CoefficientSeries32 = simulator::CoefficientSeries<f32>;
pub type FunctionalSample64 = simulator::FunctionalSample<f64>;
pub type FunctionalSample32 = simulator::FunctionalSample<f32>;
pub type OperatorEstimate64 = estimators::OperatorEstimate<f64>;
pub type OperatorEstimate32 = estimators::OperatorEstimate<f32>;
pub type Grid64 = quadrature::Grid<f64>;
pub type Grid32 = quadrature::Grid<f32>;
