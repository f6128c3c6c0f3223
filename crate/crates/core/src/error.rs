use std::path::PathBuf;

use thiserror::Error;

use crate::scenario::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("bad override `{key}`: {reason}")]
    Override { key: String, reason: String },

    #[error("pose ({x:.3}, {y:.3}) is outside the map")]
    PoseOutsideMap { x: f64, y: f64 },

    #[error("detection at ({x:.3}, {y:.3}) is outside the field of view of the observing pose")]
    DetectionOutsideFov { x: f64, y: f64 },

    #[error("prediction horizon must be non-negative, got {0}")]
    NegativeHorizon(f64),

    #[error("expected {expected} predicted grids, got {got}")]
    PredictionCount { expected: usize, got: usize },

    #[error("grid geometry mismatch: {0}")]
    Geometry(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("step {step} (t = {t} s): {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("trial with seed {seed} failed: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Trace(#[from] crate::harness::trace::TraceError),

    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
