//! Simulation of single-photon-refocused Gaussian interferometry: passive
//! networks, squeezed-vacuum covariance propagation, homodyne statistics,
//! Fisher information and Monte Carlo phase estimation.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

// `!(x > 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod gaussian;
pub mod homodyne;
pub mod linalg;
pub mod metrology;
pub mod network;
pub mod scalar;
pub mod scenarios;

pub use error::{Error, Result};
pub use scalar::{wrap_angle, Real};

pub type UnitaryMatrix = network::Unitary<f64>;
pub type ParamNetwork = network::ParamNetwork<f64>;
pub type TransitionResult = network::TransitionResult<f64>;
pub type ProbeSpec = gaussian::ProbeSpec<f64>;
pub type CovarianceMatrix = gaussian::CovarianceMatrix<f64>;
pub type MeasurementRecord = homodyne::MeasurementRecord<f64>;
pub type HomodyneSetting = homodyne::HomodyneSetting<f64>;
pub type ConditionParams = metrology::ConditionParams<f64>;
pub type FisherReport = metrology::FisherReport<f64>;
pub type Scenario = scenarios::Scenario<f64>;
pub type ExperimentConfig = estimation::ExperimentConfig<f64>;
pub type ScalingReport = estimation::ScalingReport<f64>;
