//! Command-level error type with a stable exit-code mapping.
//!
//! Every failure a command can hit is folded into one of four categories,
//! each with its own process exit code so scripts can branch on the kind of
//! failure without scraping stderr:
//!
//! | category     | exit code | examples                                   |
//! |--------------|-----------|--------------------------------------------|
//! | `Parse`      | 2         | malformed scenario/trace file, bad flags   |
//! | `Io`         | 3         | missing file, unwritable output, bad checksum |
//! | `Infeasible` | 4         | design query with no solution              |
//! | `Validation` | 5         | a Monte Carlo suite failed its gates       |
//!
//! Exit code 0 is success; clap reports its own usage errors with code 2,
//! which lines up with `Parse`.

use std::fmt;

/// Failure category carried from command logic to the process exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Input text (scenario, trace, report, flag value) failed to parse or
    /// violated a format invariant.
    Parse(String),
    /// The operating system refused a read or write, or stored data failed
    /// an integrity check.
    Io(String),
    /// A design-space query has no answer in the physical domain.
    Infeasible(String),
    /// A validation suite ran to completion and at least one gate failed.
    Validation(String),
}

impl CliError {
    /// Process exit code for this failure category.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Io(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Validation(_) => 5,
        }
    }

    /// Wraps a low-level I/O failure with the path it concerned.
    pub fn io_at(path: &std::path::Path, err: &std::io::Error) -> CliError {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(msg) => write!(f, "parse: {msg}"),
            CliError::Io(msg) => write!(f, "io: {msg}"),
            CliError::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            CliError::Validation(msg) => write!(f, "validation: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> CliError {
        CliError::Io(err.to_string())
    }
}

impl From<toml::de::Error> for CliError {
    fn from(err: toml::de::Error) -> CliError {
        // The TOML error display already carries line/column context and a
        // caret snippet; keep it verbatim.
        CliError::Parse(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> CliError {
        CliError::Parse(format!("line {}, column {}: {err}", err.line(), err.column()))
    }
}

/// Maps a core-domain error onto `Parse`: the input described an invalid
/// physical configuration.
pub fn invalid_input(err: dspe_core::Error) -> CliError {
    CliError::Parse(err.to_string())
}

/// Maps a core-domain error onto `Infeasible`: the configuration was legal
/// but the requested design point does not exist.
pub fn infeasible(err: dspe_core::Error) -> CliError {
    CliError::Infeasible(err.to_string())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
