//! Learning bounded in-degree polytree Bayesian networks from samples.
//!
//! The pipeline: recover a skeleton with Chow-Liu ([`skeleton`]), orient it
//! with conditional mutual information tests ([`orientation`]), then fit
//! conditional probability tables ([`param_fit`]). Everything is checked
//! against exact dense joints ([`model`]) on small instances.

pub mod ci_tester;
pub mod error;
pub mod gadgets;
pub mod harness;
pub mod instance;
pub mod model;
pub mod orientation;
pub mod param_fit;
pub mod properties;
pub mod rng;
pub mod sampling;
pub mod skeleton;

pub use error::{Error, Result};
pub use model::{Alphabet, DiscreteBayesNet, JointTable, PolytreeGraph, Skeleton};
pub use rng::RngSeed;
