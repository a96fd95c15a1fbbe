//! Batch front-end: configuration parsing, experiment runs and CSV reports.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, ExperimentConfig, Mode, RandomSumSpec};
pub use run::{run, Outcome, RunError};
