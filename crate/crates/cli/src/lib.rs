//! Library half of the `dyadnet` command-line tool: CSV ingestion, config
//! parsing and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod ingest;
pub mod report;

use dyadnet::error::Error as CoreError;

use crate::ingest::IngestError;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const PARSE: u8 = 3;
    pub const INCOMPLETE: u8 = 4;
    pub const RANK_DEFICIENT: u8 = 5;
    /// The fit is still written and flagged.
    pub const GEE_NOT_CONVERGED: u8 = 6;
    pub const NUMERIC: u8 = 7;
    pub const CONFIG: u8 = 8;
    pub const ACCEPTANCE_FAILED: u8 = 9;
}

/// An error carrying the exit code it maps to.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn io(context: &str, err: impl std::fmt::Display) -> Self {
        Self::new(exit::IO, format!("{context}: {err}"))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::IncompleteData { .. } => exit::INCOMPLETE,
            CoreError::SingularDesign { .. } => exit::RANK_DEFICIENT,
            CoreError::InvalidDyad(_) | CoreError::DimensionMismatch { .. } => exit::PARSE,
            CoreError::NotInvertible(_) | CoreError::InvalidResiduals(_) => exit::NUMERIC,
            CoreError::InsufficientActors { .. }
            | CoreError::InsufficientLayers { .. }
            | CoreError::InvalidParameter(_)
            | CoreError::NotCentered { .. }
            | CoreError::Unsupported(_) => exit::CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Parse(_) => Self::new(exit::PARSE, e.to_string()),
            IngestError::Incomplete(_) => Self::new(exit::INCOMPLETE, e.to_string()),
            IngestError::Core(inner) => inner.into(),
        }
    }
}

/// Version tag written at the top level of every JSON output.
pub const SCHEMA: &str = "dyadnet/1";
