//! Unsupervised training of convex ridge regularizers from corrupted images.
//!
//! A prior `g_θ` is learned by maximizing the marginal likelihood of noisy
//! measurements: one Langevin chain per measurement samples the posterior,
//! one chain samples the prior, and their θ-gradients drive a projected
//! stochastic ascent on θ. The trained prior is then used for posterior-mean
//! sampling or MAP reconstruction.

pub mod baselines;
pub mod cli;
pub(crate) mod conv;
pub mod crr;
pub mod error;
pub mod estimators;
pub mod gradcheck;
pub mod io;
pub mod likelihoods;
pub mod metrics;
pub mod operators;
pub mod regularizer;
pub mod rng;
pub mod samplers;
pub mod sapg;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Dataset, Image, Tensor};
