//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by ingestion, training, scoring and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column `{column}`: missing value")]
    MissingValue { row: usize, column: String },

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column `{column}` is constant; drop it or override its kind")]
    ConstantColumn { column: String },

    #[error("no column named `{column}`")]
    UnknownColumn { column: String },

    #[error("column index {index} out of range for {width} columns")]
    ColumnIndex { index: usize, width: usize },

    #[error("columns `{first}` and `{second}` have different lengths ({first_len} vs {second_len})")]
    UnequalColumns {
        first: String,
        second: String,
        first_len: usize,
        second_len: usize,
    },

    #[error("a dataset needs at least 2 columns, got {0}")]
    TooFewColumns(usize),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("row {row}, label column `{column}`: `{value}` is not a binary label (expected 0 or 1)")]
    NonBinaryLabel {
        row: usize,
        column: String,
        value: String,
    },

    #[error("AUC is undefined: labels contain only one class")]
    UndefinedAuc,

    #[error("no out-of-bag predictions for this row")]
    NoOobPredictions,

    #[error("model file: {0}")]
    Model(String),
}

/// Process exit codes used by the CLI: 0 success, 1 usage/config, 2 data.
impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
