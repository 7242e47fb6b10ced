//! Likelihood-free Bayesian inference with ABC-MCMC.
//!
//! The crate provides four Metropolis-Hastings samplers for simulator-defined
//! models: marginal and pseudo-marginal kernel ABC, adaptive
//! synthetic-likelihood ABC, and Gaussian-process-surrogate ABC. The last two
//! decide each MH step only once the Monte-Carlo estimate of the decision
//! error falls below a user threshold, running more simulations (or adding
//! surrogate training points) until it does.

pub mod accept;
pub mod dist;
pub mod error;
pub mod gp;
pub mod harness;
pub mod rng;
pub mod samplers;
pub mod simulators;
pub mod synthetic;

pub use error::{Error, Result};
