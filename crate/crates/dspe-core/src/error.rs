//! Library-wide error type.

use alloc::string::String;
use core::fmt;

/// Convenience alias used by every fallible routine in this crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors produced by trace synthesis, detection, and estimation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its documented domain (non-positive length,
    /// probability outside (0, 1), fault placed past its branch end, ...).
    InvalidArgument(String),
    /// Two trace-shaped inputs do not share the same sample grid
    /// (origin, spacing, or length differ).
    GridMismatch(String),
    /// An estimator's log argument left its valid domain: the observed power
    /// deviation is deeper than the signal model allows at this noise level.
    EstimationUndefined(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::GridMismatch(msg) => write!(f, "sample grid mismatch: {msg}"),
            Error::EstimationUndefined(msg) => write!(f, "estimation undefined: {msg}"),
        }
    }
}

#[cfg(any(test, feature = "std"))]
impl std::error::Error for Error {}
