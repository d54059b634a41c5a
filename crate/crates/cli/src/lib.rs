//! Scenario runner: parses a flat TOML configuration, runs one of the
//! spectrum, phase-map, evolve, metric, lindblad-metric, control-opt or
//! yang-lee pipelines and writes deterministic CSV files.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_config, RunConfig, Scenario};
pub use error::{CliError, CliResult};
pub use run::{execute, run};
