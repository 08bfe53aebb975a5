//! Shared error type. Variants carry enough context to point at the offending
//! unit, agent, or field without the caller re-deriving it.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched vector or matrix dimensions when assembling a network.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A weight, share, or parameter left its allowed interval.
    #[error("{what} = {value} outside allowed range {lo}..={hi}")]
    OutOfRange {
        what: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Settling produced NaN or infinity; names the first bad unit.
    #[error("non-finite value in unit {unit} during settling")]
    NonFinite { unit: usize },

    /// A population file failed validation; names the agent row and field.
    #[error("agent {row}, field {field}: {message}")]
    Schema {
        row: usize,
        field: &'static str,
        message: String,
    },

    /// Structural problem in a config or input file (missing section,
    /// inconsistent labels, bad reference).
    #[error("{0}")]
    Invalid(String),

    /// Similarity queried against a space built from a different population.
    #[error("similarity space mismatch: pair distance {delta} exceeds space maximum {max_delta}")]
    SpaceMismatch { delta: f64, max_delta: f64 },

    /// Unknown agent id passed to a graph or population lookup.
    #[error("unknown agent id {0}")]
    UnknownAgent(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
