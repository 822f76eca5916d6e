//! Offline analysis of run artifacts.

mod anomaly;
mod cascade;
mod ngram;

use thiserror::Error;

pub use anomaly::{anomaly_scan, Anomaly, AnomalyKind, AnomalyReport, ScanOptions, DEFAULT_THETA};
pub use cascade::{cascade_stats, CascadeStats, TriggerTally};
pub use ngram::{fit_ngram, predict_next, ActionKey, NGramModel, Token};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyzerError {
    #[error("empty behavior log")]
    EmptyLog,
    #[error("n-gram order must be at least 1")]
    Order,
    #[error("artifacts do not belong together: {0}")]
    Mismatch(String),
}
