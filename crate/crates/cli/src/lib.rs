//! Configuration, scenario execution and serialization for the `viscobeam`
//! command-line tool.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 violated modelling
//! hypothesis, 3 solver failure. Every failure leaves `diagnostic.json` in the
//! output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod initial;
pub mod output;

pub use commands::{execute, run, Command};
pub use config::RunConfig;
pub use error::{CliError, CliResult, ExitCode};
pub use initial::{InitialData, PrehistorySpec};
