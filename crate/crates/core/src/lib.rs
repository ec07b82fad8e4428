//! Circulant channel-specific (CCS) token mixing for MLP-Mixer and
//! ResMLP-style vision backbones.
//!
//! The numeric code is generic over [`Scalar`] (`f64` or `f32`); the aliases
//! below fix the working precision used by the CLI and the test suites.

pub mod circulant;
mod error;
pub mod model;
pub mod numerics;
mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = numerics::Tensor<f64>;
pub type Tensor32 = numerics::Tensor<f32>;
pub type ComplexBuffer64 = numerics::ComplexBuffer<f64>;
pub type CcsWeights64 = circulant::CcsWeights<f64>;
pub type ModelParams64 = model::ModelParams<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type ParamGrads64 = training::ParamGrads<f64>;
