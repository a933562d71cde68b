//! Energy-aware scheduling simulation for interactive web browsing.
//!
//! The crate models the full decision loop: page descriptors and their
//! feature pipeline, feed-forward QoE/FPS predictors, a Pareto-frontier
//! configuration search, synthetic device and user oracles, transfer
//! learning across environments, conformal monitoring of deployed
//! predictors, and an experiment harness with cross-validation.

pub mod adapt;
pub mod conformal;
pub mod corpus;
pub mod features;
pub mod harness;
pub mod ingest;
pub mod device;
pub mod neural;
pub mod predictors;
pub mod search;
pub mod error;
pub mod rng;

pub use error::{Error, Result};
