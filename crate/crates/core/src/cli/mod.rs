//! Batch front door: configuration, dispatch and artifact serialization.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, Format, SetSpec, Subcommand};
pub use output::{serialize_report, Meta, Report};
pub use run::{execute, run_cli, Outcome};
