use std::io;

use thiserror::Error;

/// Errors produced by the benchmark engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// Matrix or vector dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),
    /// An operation was called with unusable inputs (empty sample list, ...).
    #[error("usage error: {0}")]
    Usage(String),
    /// A scenario or evaluation protocol contract was violated.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// A dataset invariant does not hold.
    #[error("dataset error: {0}")]
    Dataset(String),
    /// Schedule construction failed after bounded retries.
    #[error("schedule error: {0}")]
    Schedule(String),
    /// A computation produced a NaN or infinite result.
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parse failures for the feature-file format. Line numbers are 1-based.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: malformed header: {detail}")]
    MalformedHeader { line: usize, detail: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RowArity {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: invalid number {token:?}")]
    InvalidNumber { line: usize, token: String },
    #[error("line {line}: {field} {value} out of range ({bound})")]
    ValueOutOfRange {
        line: usize,
        field: &'static str,
        value: usize,
        bound: String,
    },
    #[error("line {line}: class {class} mapped to category {found}, but earlier rows mapped it to {expected}")]
    InconsistentCategory {
        line: usize,
        class: usize,
        expected: usize,
        found: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
