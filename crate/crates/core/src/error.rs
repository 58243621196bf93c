//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Cell-level parse failure in a tabular input. Row and column are
    /// 1-based; row 1 is the first data row after the header.
    #[error("parse error at row {row}, column {column} ({name}): {message}")]
    Parse {
        row: usize,
        column: usize,
        name: String,
        message: String,
    },

    #[error("invalid return panel: {0}")]
    InvalidPanel(String),

    #[error("invalid portfolio set: {0}")]
    InvalidSet(String),

    #[error("invalid portfolio weights: {0}")]
    InvalidWeights(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A sample-value z grid came out empty on one side of zero. The caller
    /// should switch to an explicit fixed grid for that side.
    #[error(
        "no {side} z values in the sample grid; supply a fixed z grid covering the {side} side"
    )]
    EmptyGridSide { side: &'static str },

    /// Inner set not contained in the outer set where containment is a
    /// precondition (character computation, spanning pipeline).
    #[error("set containment violated: {0}")]
    NotSubset(String),

    #[error("linear program infeasible")]
    Infeasible,

    #[error("linear program unbounded")]
    Unbounded,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}
