//! Classical versus weighted-Gini beta: estimators, their difference, the
//! asymptotic variance of the difference, bootstrap inference, and Monte
//! Carlo validation.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod empirical;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod numeric;
pub mod quadrature;
pub mod rng;
mod scalar;
pub mod simulation;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PairedSampleF64 = empirical::PairedSample<f64>;
pub type PairedSampleF32 = empirical::PairedSample<f32>;
pub type WeightFunctionF64 = weights::WeightFunction<f64>;
pub type WeightFunctionF32 = weights::WeightFunction<f32>;
pub type BivariateModelF64 = asymptotics::BivariateModel<f64>;
pub type BetaEstimatesF64 = estimators::BetaEstimates<f64>;
pub type VarianceComponentsF64 = asymptotics::VarianceComponents<f64>;
pub type InferenceReportF64 = inference::InferenceReport<f64>;
pub type MonteCarloPlanF64 = simulation::MonteCarloPlan<f64>;
