//! Command-line front end for `cvleak-core`: TOML run configs, parameter
//! sweeps to CSV or JSON, the trusted-noise viability matrix and Monte-Carlo
//! closure checks.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{Outcome, RunOptions};
