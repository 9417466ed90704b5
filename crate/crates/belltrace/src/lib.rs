//! Configuration, parallel runs, file formats and reporting on top of
//! `belltrace-core`.

pub mod app;
pub mod config;
pub mod formats;
pub mod report;
pub mod runner;

pub use app::{run, CliError};
pub use config::{parse_config, ExperimentConfig};
