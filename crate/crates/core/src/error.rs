use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record ({field}): {message}")]
    Malformed {
        path: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("{path}:{line}: passage `{passage_id}` refers to unknown topic `{topic_id}`")]
    UnknownTopic {
        path: String,
        line: usize,
        passage_id: String,
        topic_id: String,
    },

    #[error("{path}:{line}: ref_score {value} out of domain [0,1] or {{2}}")]
    ScoreOutOfDomain {
        path: String,
        line: usize,
        value: f64,
    },

    #[error("{path}:{line}: anchor spans overlap in passage `{passage_id}`")]
    OverlappingAnchors {
        path: String,
        line: usize,
        passage_id: String,
    },

    #[error("{path}:{line}: duplicate {what} `{id}`")]
    Duplicate {
        path: String,
        line: usize,
        what: &'static str,
        id: String,
    },

    #[error("empty reference for topic `{0}`")]
    EmptyReference(String),

    #[error("background model has no probability for reference unit `{0}`")]
    BackgroundMissingUnit(String),

    #[error("unit kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{path}: malformed vector file: {message}")]
    VectorFormat { path: String, message: String },

    #[error("{path}: truncated vector file: header declares {expected} entries, found {found}")]
    TruncatedVectors {
        path: String,
        expected: usize,
        found: usize,
    },

    #[error("fold count {requested} out of range (need 2 <= folds <= {topics} topics)")]
    FoldCount { requested: usize, topics: usize },

    #[error("unknown topic `{0}`")]
    NoSuchTopic(String),

    #[error("cannot rank a mix of measures ({0} and {1})")]
    MixedMeasures(String, String),

    #[error("no embedding store registered for measure {0}")]
    MissingStore(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

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
