//! Command-line front end for the `dinls` simulator: configuration files,
//! experiment drivers, checks and sweeps.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod experiment;
pub mod sweep;

pub use config::{ConfigError, ExperimentConfig, Kind};
pub use experiment::{run_experiment, run_experiment_with_jobs, Artifacts, RunError, Summary};
