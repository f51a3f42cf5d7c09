//! Experiment configs, the grid runner, CSV/JSON output and the CLI.

pub mod cli;
pub mod config;
pub mod output;
pub mod run;

pub use config::{AGrid, AHatRule, ExperimentConfig, ExperimentKind};
pub use run::{run, ResultRow};
