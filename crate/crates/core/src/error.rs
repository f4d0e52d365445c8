//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two operands disagree on shape. Carries both shapes so the message
    /// is actionable without a debugger.
    #[error("{op}: dimension mismatch ({left_rows}x{left_cols} vs {right_rows}x{right_cols})")]
    DimMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("{op}: expected shape {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("{op}: empty batch (N = 0)")]
    EmptyBatch { op: &'static str },

    #[error("non-finite value encountered in {what}")]
    NonFinite { what: String },

    #[error("degenerate mixture priors: every component has zero weight")]
    DegeneratePrior,

    /// A similarity input collapsed to the zero vector; cosine similarity is
    /// undefined there and silently mapping it to 0 would mask a dead network.
    #[error("zero-norm vector: {0}")]
    ZeroNorm(&'static str),

    #[error("unknown class label {label} (valid labels are 1..={num_classes})")]
    UnknownLabel { label: usize, num_classes: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
