//! Experiment harness for flexible-length cascading bandits: TOML
//! configuration, CSV datasets, the round loop, and CSV/JSON output.

pub mod config;
pub mod dataset;
pub mod harness;

pub use config::{ConfigError, ExperimentConfig, Overrides};
pub use harness::{run_experiment, run_many, run_to_files, RunOutput, RunRow, Summary};
