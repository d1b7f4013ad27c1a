//! Experiment runner for the quaternion regression classifiers: a flat TOML
//! config in, recognition rates and convergence traces out.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, Solver, WeightsMode};
pub use error::{CliError, Result};
pub use runner::{evaluate, run_experiment, Params, QueryRecord, ResultsRecord, SweepPoint};
