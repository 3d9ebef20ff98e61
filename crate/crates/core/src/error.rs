use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Parse,
    Validation,
    Runtime,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{0} is empty")]
    EmptyInput(String),

    #[error("invalid query `{query}`: {message}")]
    InvalidQuery { query: String, message: String },

    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),

    #[error("predicate `{0}` has already been divided")]
    DuplicateDivide(String),

    #[error("unknown table id {0}")]
    UnknownTable(usize),

    #[error("table `{0}` already exists with the same contents")]
    DuplicateTable(String),

    #[error("invalid merge: {0}")]
    InvalidMerge(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid rewrite: {0}")]
    InvalidRewrite(String),

    #[error("executing priority item {item} of query `{query}`: {source}")]
    ItemExecution {
        query: String,
        item: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("episode {episode}: {source}")]
    Episode {
        episode: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("state encoding needs {needed} slots but the vector has {dim}")]
    EncodingOverflow { needed: usize, dim: usize },

    #[error("action {0} is not legal in the current state")]
    IllegalAction(usize),

    #[error("no legal action available")]
    EmptyMask,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("result arity mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint was trained on different inputs (expected hash {expected}, found {actual})")]
    HashMismatch { expected: String, actual: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Episode { source, .. } => source.class(),
            Error::Parse { .. } | Error::Json(_) => ErrorClass::Parse,
            Error::EmptyInput(_)
            | Error::InvalidQuery { .. }
            | Error::UnknownPredicate(_)
            | Error::Config(_)
            | Error::HashMismatch { .. }
            | Error::EncodingOverflow { .. } => ErrorClass::Validation,
            Error::Io { .. } | Error::Csv(_) => ErrorClass::Io,
            _ => ErrorClass::Runtime,
        }
    }
}
