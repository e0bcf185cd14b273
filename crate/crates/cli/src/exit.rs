//! Process exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | unclassified failure |
//! | 2 | configuration or usage error (including bad flags) |
//! | 3 | I/O error (missing files, unwritable output) |
//! | 4 | integrity error (split leakage, test fold in cross-validation, stale caches) |
//! | 5 | numeric error (non-finite loss, gradient or prediction) |
//! | 6 | malformed or inconsistent data (WFDB, CSV, JSON, checkpoint/spec mismatch) |
//! | 7 | a verification did not pass (gradient check) |

use std::fmt;

use ecgnet_core::Error;

pub const OK: i32 = 0;
pub const OTHER: i32 = 1;
pub const CONFIG: i32 = 2;
pub const IO: i32 = 3;
pub const INTEGRITY: i32 = 4;
pub const NUMERIC: i32 = 5;
pub const DATA: i32 = 6;
pub const CHECK_FAILED: i32 = 7;

/// Failures raised by the command layer itself.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    CheckFailed(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    CliError::Config(msg.into()).into()
}

pub fn check_failed(msg: impl Into<String>) -> anyhow::Error {
    CliError::CheckFailed(msg.into()).into()
}

fn core_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_) | Error::Usage(_) | Error::Parameter(_) => CONFIG,
        Error::Io { .. } => IO,
        Error::Integrity(_) => INTEGRITY,
        Error::Numeric(_) | Error::DegenerateBatch(_) => NUMERIC,
        Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => IO,
        _ => DATA,
    }
}

/// Exit code for an error, from the first cause in the chain that is recognised.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Config(_) => CONFIG,
                CliError::CheckFailed(_) => CHECK_FAILED,
            };
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_code(e);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return IO;
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            return if matches!(e.kind(), csv::ErrorKind::Io(_)) { IO } else { DATA };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return DATA;
        }
    }
    OTHER
}
