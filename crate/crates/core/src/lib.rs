//! Exact simulation and closed-form moments for the linear stochastic equation
//!
//! ```text
//! X_t = X_0 + Y_t - ∫_{(0,t]} X_{s-} dZ_s
//! ```
//!
//! with nondecreasing finite-activity drivers `Y` and `Z` (jumps of `Z` in
//! `(0, 1]`). Shot-noise, growth-collapse (AIMD), clearing and generalized
//! Ornstein-Uhlenbeck processes are special cases.
//!
//! The analytic and path modules are generic over [`Scalar`] (`f32`, `f64`);
//! the aliases below fix `f64`, which is what the estimators and the CLI use.

// NaN must fail every positivity check, so `!(x > 0)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimate;
pub mod model;
pub mod moments;
pub mod pathsim;
pub mod quad;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type JumpDistributionF64 = model::JumpDistribution<f64>;
pub type SubordinatorSpecF64 = model::SubordinatorSpec<f64>;
pub type DriverPairF64 = model::DriverPair<f64>;
pub type EventStreamF64 = pathsim::EventStream<f64>;
pub type PathF64 = pathsim::Path<f64>;
pub type ExpMixtureF64 = moments::ExpMixture<f64>;
pub type DeathModelF64 = moments::DeathModel<f64>;

pub type SubordinatorSpecF32 = model::SubordinatorSpec<f32>;
pub type ExpMixtureF32 = moments::ExpMixture<f32>;
pub type DeathModelF32 = moments::DeathModel<f32>;
