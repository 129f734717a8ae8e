//! Bayesian simultaneous quantile regression with I-spline conditional
//! CDFs whose coefficients are produced by a one-hidden-layer network.
//!
//! The pipeline maps the response to the unit interval, samples the network
//! weights with NUTS, averages the sampled CDFs and inverts them to obtain
//! non-crossing quantile curves. [`ale`] explains the fitted quantiles with
//! accumulated local effects, and [`sim`] provides the benchmark designs.

pub mod ale;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod network;
pub mod persist;
pub mod posterior;
pub mod sampler;
pub mod sim;
pub mod spline;

pub use error::{QuinnError, Result};
pub use model::{fit, FitResult, ModelConfig, Predictor};
pub use sampler::NutsConfig;
