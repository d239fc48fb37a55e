use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    ManifestParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: unknown label {label:?} (expected \"sensitive\" or \"non_sensitive\")")]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        label: String,
    },

    #[error("{path}:{line}: duplicate video id {id:?} (first seen on line {first_line})")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        first_line: usize,
        id: String,
    },

    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("cannot encode {path}: {message}")]
    Encode { path: PathBuf, message: String },

    #[error("{path}: no compressed-domain motion data ({codec} does not export motion vectors)")]
    NoMotionData { path: PathBuf, codec: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("inference backend error: {0}")]
    Backend(String),

    #[error("video produced no features")]
    NoFeatures,

    #[error("training data must contain both classes ({positives} sensitive, {negatives} non-sensitive given)")]
    SingleClass { positives: usize, negatives: usize },

    #[error("undefined rate: {0}")]
    UndefinedRate(&'static str),

    #[error("F undefined: no positive ground truth and no positive predictions")]
    FUndefined,

    #[error("too few records: {0}")]
    TooFewRecords(String),

    #[error("id mismatch: {0}")]
    IdMismatch(String),

    #[error("no cached features for {}: run `extract` first", .0.join(", "))]
    MissingFeatures(Vec<String>),

    #[error("feature cache {path}: {message}")]
    Cache { path: PathBuf, message: String },

    #[error("model file {path}: {message}")]
    ModelFile { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
