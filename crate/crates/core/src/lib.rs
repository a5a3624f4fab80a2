//! Hybrid clinical risk modelling: adaptive-LASSO screening, BART
//! importance and interaction scores, ODE-informed interaction features, a
//! Bayesian logistic regression with convergence diagnostics, baseline
//! classifiers and a metric harness.

pub mod adaptive_lasso;
pub mod bart;
pub mod baselines;
pub mod bayes;
pub mod dataset;
pub mod error;
pub mod gallstone;
mod linalg;
pub mod ode;
mod par;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
