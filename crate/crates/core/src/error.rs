use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input has no tokens")]
    EmptyInput,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("requested sample of {requested} but only {available} distinct queries")]
    SizeTooLarge { requested: usize, available: usize },
    #[error("malformed file at line {line}: {msg}")]
    MalformedFile { line: usize, msg: String },
    #[error("inconsistent dimension at line {line}: expected {expected}, got {got}")]
    InconsistentDimension {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("segment masks do not cover the segmentation: {0}")]
    CoverageMismatch(String),
    #[error("category {category:?} has {size} products, need at least 2")]
    CategoryTooSmall { category: String, size: usize },
    #[error("malformed row at line {line}: {msg}")]
    MalformedRow { line: usize, msg: String },
    #[error("example labels have no tokens of class {0}")]
    MissingClass(u8),
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
