//! Experiment runner for adaptive weighted SGD: JSON configs with
//! versioned presets, parallel seeds, metrics CSVs and run comparison.

pub mod compare;
pub mod config;
pub mod error;
pub mod gendata;
pub mod presets;
pub mod scenarios;
pub mod summary;

pub use config::{build_config, ConfigSource, ExperimentConfig, Method, Scenario};
pub use error::{CliError, Result};
pub use scenarios::run_experiment;
pub use summary::{RunResult, Summary};
