use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion error in trial {trial}, frame {frame}: {reason}")]
    Ingest {
        trial: String,
        frame: i64,
        reason: String,
    },
    #[error("unknown gesture id {0} (expected 0..=6)")]
    UnknownGesture(i64),
    #[error("segment too short: T >= 2 required, got {0}")]
    SegmentTooShort(usize),
    #[error("need at least {folds} distinct trials for {folds} folds, found {trials}")]
    TooFewTrials { trials: usize, folds: usize },
    #[error("empty {0} pool")]
    EmptyPool(&'static str),
    #[error("unknown shift preset `{0}` (available: none, translation, scale, tilt, combined)")]
    UnknownPreset(String),
    #[error("unknown method `{0}` (available: baseline-position, baseline-direction, mdok, mdok+kvatt)")]
    UnknownMethod(String),
    #[error("invalid scale {scale} for a sequence of length {len}")]
    InvalidScale { scale: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("no projection for relation scale {0}")]
    MissingProjection(usize),
    #[error("batch is missing the {0} domain")]
    MissingDomain(&'static str),
    #[error("classification batch contains a target-domain or unlabeled segment")]
    TargetInClassification,
    #[error("non-finite loss at epoch {epoch}, step {step}: L_C={classification}, L_K-D={kd}, L_KV-D={kvd}")]
    Diverged {
        epoch: usize,
        step: usize,
        classification: f64,
        kd: f64,
        kvd: f64,
    },
    #[error("empty segment list")]
    EmptySegments,
    #[error("metrics reports disagree on class count ({0} vs {1})")]
    InconsistentReports(usize, usize),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
