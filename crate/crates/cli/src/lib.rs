//! Experiment runner: JSON configs in, CSV and JSON reports out.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use config::{load_config, EnvironmentSpec, ExperimentConfig, Mode};
pub use error::CliError;
pub use runner::{run_experiment, seed_file, Log, Quiet, RunOutcome, Stderr};
