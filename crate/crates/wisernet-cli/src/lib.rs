//! Library side of the CLI: every subcommand is a plain function so
//! integration tests can drive the same code paths in-process.

pub mod commands;
pub mod manifest;

use wisernet::Error;

/// Exit codes: 0 success, 1 verification failure, 2 usage, 3 IO,
/// 4 numerical abort.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Config(_) | Error::Shape(_) => 2,
        Error::Io { .. } | Error::Load(_) => 3,
        Error::Numerical(_) => 4,
    }
}
