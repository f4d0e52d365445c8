//! Library half of the `cbn` binary: argument grammar, config-file layering,
//! run manifests, and the four command implementations. Kept as a library so
//! integration tests can drive the exact command logic in-process.

pub mod args;
pub mod commands;
pub mod config;
pub mod manifest;

/// A command failure carrying the process exit code it maps to.
///
/// The documented code table:
/// - `2` — invalid flags or configuration,
/// - `3` — an input artifact (dataset, checkpoint) is missing or unreadable,
/// - `4` — training aborted on a non-finite loss or gradient,
/// - `1` — anything else, including gradient-check failures.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> CliError {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> CliError {
        CliError {
            code: 3,
            message: message.into(),
        }
    }

    pub fn non_finite(message: impl Into<String>) -> CliError {
        CliError {
            code: 4,
            message: message.into(),
        }
    }

    pub fn other(message: impl Into<String>) -> CliError {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Map a core error to the exit-code table for a training run: non-finite
/// aborts are code 4, everything else lands on the generic failure code.
pub fn map_train_error(err: cbn_core::Error) -> CliError {
    match err {
        cbn_core::Error::NonFinite { .. } => CliError::non_finite(err.to_string()),
        _ => CliError::other(err.to_string()),
    }
}
