//! Experiment harness for the CutNMF recommender: configuration, the
//! convergence and accuracy studies, and the summary report.

pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod study;

pub use config::{parse_settings, Algorithm, EvalSetKind, ExperimentConfig};
pub use error::{HarnessError, Result};
