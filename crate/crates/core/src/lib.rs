//! Dueling bandits with delayed, censored preference feedback.
//!
//! The crate provides linear and neural upper-confidence policies that
//! correct for missing feedback with inverse-probability weighting, a
//! synthetic preference environment with stochastic delays, and an
//! experiment harness that writes regret traces for plotting.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod delay;
pub mod environment;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod linear_mle;
pub mod linear_policy;
pub mod neural_model;
pub mod neural_policy;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
