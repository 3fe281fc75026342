//! Two-stage regression on network-valued covariates.
//!
//! Each subject's binary network is first reduced to an intercept and a
//! matrix of node-level latent scales (a logistic latent-scale model fitted
//! by Pólya-Gamma EM). The embeddings, together with optional subject-level
//! covariates, then feed a Gaussian process regression with a composite
//! squared-exponential kernel, fitted either by maximum likelihood or by a
//! Metropolis-within-Gibbs sampler.
//!
//! Numerical code is generic over [`Real`]; `f64` aliases are exported at
//! the crate root for the common case.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embed;
pub mod error;
pub mod gp;
pub mod io;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Scalar type accepted by the numerical routines (`f32` or `f64`).
pub trait Real: RealField + Copy + ToPrimitive {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Converts a working scalar back to `f64`.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub type Embedding = embed::Embedding<f64>;
pub type EmConfig = embed::EmConfig<f64>;
pub type GpHyperparams = gp::GpHyperparams<f64>;
pub type TrainingSet = gp::TrainingSet<f64>;
pub type GpModel = gp::GpModel<f64>;
pub type Subject = gp::Subject<f64>;
pub type Chains = gp::Chains<f64>;
pub type EvalReport = sim::EvalReport;
