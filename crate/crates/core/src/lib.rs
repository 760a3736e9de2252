//! Near-field radio map construction from sparse RSS samples.
//!
//! The pipeline simulates spherical-wavefront RSS over an angular-radial
//! grid, samples it per angular slice (uniformly or by inverse mu-law
//! companding), fits a regularized multiquadric interpolant along each
//! slice, summarizes leave-one-out residuals with a Huber M-estimate, and
//! refines the interpolated prior with box-constrained nuclear-norm
//! minimization. A benchmarking harness reproduces the reference
//! experiments and persists maps, masks, and metrics as CSV with JSON
//! sidecars.
//!
//! Everything numeric is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix the common `f64` instantiation.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod io;
pub mod lowrank;
pub mod lpr;
pub mod metrics;
pub mod rbf;
pub mod robust;
pub mod rng;
pub mod sampling;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` instantiations of the main types.
pub type ArrayGeometry = channel::ArrayGeometry<f64>;
pub type Beamformer = channel::Beamformer<f64>;
pub type GridSpec = channel::GridSpec<f64>;
pub type RadioMap = channel::RadioMap<f64>;
pub type MuLawParams = sampling::MuLawParams<f64>;
pub type SamplingStrategy = sampling::SamplingStrategy<f64>;
pub type Observations = sampling::Observations<f64>;
pub type SliceMeasurements = rbf::SliceMeasurements<f64>;
pub type RbfConfig = rbf::RbfConfig<f64>;
pub type RbfSliceModel = rbf::RbfSliceModel<f64>;
pub type HuberConfig = robust::HuberConfig<f64>;
pub type LprConfig = lpr::LprConfig<f64>;
pub type SolverConfig = lowrank::SolverConfig<f64>;
pub type CompletionResult = lowrank::CompletionResult<f64>;
pub type SceneConfig = experiment::SceneConfig<f64>;
pub type Method = experiment::Method<f64>;
pub type PipelineConfig = experiment::PipelineConfig<f64>;
pub type ExperimentConfig = experiment::ExperimentConfig<f64>;

/// `f32` instantiations for memory-constrained use.
pub mod f32_api {
    pub type ArrayGeometry = crate::channel::ArrayGeometry<f32>;
    pub type GridSpec = crate::channel::GridSpec<f32>;
    pub type RadioMap = crate::channel::RadioMap<f32>;
    pub type Observations = crate::sampling::Observations<f32>;
    pub type RbfConfig = crate::rbf::RbfConfig<f32>;
    pub type SolverConfig = crate::lowrank::SolverConfig<f32>;
}
