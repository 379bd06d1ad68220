//! JSON-driven command line front end for the geodesic index computations
//! in the `geomorse` crate.
//!
//! A run is described by a single config file: the manifold (builtin or a
//! custom metric given as expressions), the start submanifold, an optional
//! target submanifold, the geodesic data and optional tolerance overrides.
//! Every command emits one JSON report on stdout; the report for a given
//! config and version is byte-identical across runs.

use std::fmt;

pub mod config;
pub mod expr;
pub mod report;
pub mod run;

/// Process exit codes: config or parse problems, violated preconditions,
/// numerical guard failures and cross-check mismatches get distinct
/// codes so scripts can react without parsing the report.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

/// Either a config-level problem detected by this crate or an error
/// surfaced by the geometry library.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Lib(geomorse::Error),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    /// Stable machine-readable identifier for the report.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "CONFIG_ERROR",
            CliError::Lib(e) => e.code(),
        }
    }

    pub fn class_name(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Lib(e) => match e.class() {
                geomorse::ErrorClass::Precondition => "precondition",
                geomorse::ErrorClass::Numerical => "numerical",
                geomorse::ErrorClass::Input => "input",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Lib(e) => match e.class() {
                geomorse::ErrorClass::Input => EXIT_CONFIG,
                geomorse::ErrorClass::Precondition => EXIT_PRECONDITION,
                geomorse::ErrorClass::Numerical => EXIT_NUMERICAL,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<geomorse::Error> for CliError {
    fn from(e: geomorse::Error) -> Self {
        CliError::Lib(e)
    }
}
