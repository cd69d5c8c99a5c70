//! Command-line driver for the waist experiments: config schema, presets,
//! dispatch and artifact rendering.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;

pub use cli::{main_with_args, resolve, run_config};
pub use config::{Experiment, ExperimentConfig, Format, Subcommand, TGrid};
pub use error::{CliError, Result};
pub use output::{data_rows, render, Cell, Report};
pub use run::execute;
