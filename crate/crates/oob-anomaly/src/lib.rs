//! Out-of-bag anomaly detection for mixed-type tabular data.
//!
//! One bagged tree ensemble is trained per feature column, each predicting
//! its column from the remaining ones. A row's out-of-bag predictions give
//! two statistics per feature — uncertainty (how much the ensemble
//! disagrees with itself) and disagreement (how far its consensus sits
//! from the observed value) — which are min-max scaled per feature and
//! summed into a per-row anomaly score.
//!
//! The crate ships a library surface (ingestion, forest, scoring,
//! evaluation) and the `oob` command-line tool built on it.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod forest;
pub mod scoring;

pub use error::{Error, Result};
