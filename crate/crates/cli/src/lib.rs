//! Experiment harness for `privgraph`: configuration files, baseline and
//! protected runs, λ sweeps, synthetic datasets and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiment;

pub use error::{CliError, Result};
