use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate label {label:?}")]
    DuplicateLabel { line: usize, label: String },

    #[error("line {line}: hard score {score} for {label:?} is outside [0, 1]")]
    ScoreOutOfRange { line: usize, label: String, score: f64 },

    #[error("mapping table is empty")]
    EmptyTable,

    #[error("unknown label {label:?}")]
    UnknownLabel { label: String },

    #[error(
        "hard score {score} sits on the boundary of [0, 1] and no boundary rule matches it; \
         add a rule to the boundary policy mapping {score} to an interior value"
    )]
    UnadjustedBoundary { score: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("record {record}: {message}")]
    Record { record: usize, message: String },

    #[error("{0}")]
    Domain(String),

    #[error("length mismatch: {left} predictions vs {right} targets")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("probability vector is not on the simplex (sum = {sum})")]
    NotSimplex { sum: f64 },

    #[error(
        "non-finite loss at step {step} (learning rate {learning_rate}); \
         lower the learning rate or check the targets for NaN"
    )]
    NonFiniteLoss { step: usize, learning_rate: f64 },

    #[error("model artifact: {0}")]
    Artifact(String),

    #[error("duplicate prompt id {0:?}")]
    DuplicatePrompt(String),

    #[error("every prompt failed for model {0:?}")]
    AllFailed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
