//! Echo-state-network readouts built with locally regularized orthogonal
//! forward regression.
//!
//! The numerical core is generic over the scalar type; `f64` and `f32`
//! aliases are provided below.

pub mod benchmarks;
pub mod esn;
pub mod linalg;
pub mod persistence;
pub mod rbf;
pub mod readout;
pub mod scalar;
pub mod selection;

pub use scalar::Real;

pub type EsnConfigF64 = esn::EsnConfig<f64>;
pub type EsnConfigF32 = esn::EsnConfig<f32>;
pub type ReservoirF64 = esn::Reservoir<f64>;
pub type ReservoirF32 = esn::Reservoir<f32>;
pub type RegressionProblemF64 = selection::RegressionProblem<f64>;
pub type RegressionProblemF32 = selection::RegressionProblem<f32>;
pub type LrofrFitF64 = selection::LrofrFit<f64>;
pub type LrofrFitF32 = selection::LrofrFit<f32>;
pub type ReadoutModelF64 = readout::ReadoutModel<f64>;
pub type ReadoutModelF32 = readout::ReadoutModel<f32>;
pub type ModelArchiveF64 = persistence::ModelArchive<f64>;
pub type HarvestArchiveF64 = persistence::HarvestArchive<f64>;
