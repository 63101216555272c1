//! Library side of the `finsler` command: configuration, runs, JSON
//! reports and the tables rendered from them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod run;
pub mod table;

use thiserror::Error;

pub use config::{RunConfig, CONFIG_DIR_ENV};
pub use report::{RunReport, SCHEMA_VERSION};
pub use run::{run_check, run_compare, run_tensors, Prepared};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] finsler_core::Error),
    #[error(transparent)]
    Parse(#[from] finsler_core::dsl::ParseError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const AXIOM_FAILURE: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const DEGENERATE: i32 = 3;
}

/// More than this fraction of rejected or skipped samples is reported as
/// pervasive degeneracy.
pub const DEGENERACY_THRESHOLD: f64 = 0.5;
