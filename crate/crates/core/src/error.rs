use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or corrupt image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("failed to encode image: {0}")]
    Encode(String),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported channel count {channels}: {context}")]
    Channels { channels: usize, context: &'static str },

    #[error("high-frequency ratio undefined for an all-zero plane")]
    UndefinedRatio,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("requested {requested} records but only {available} are available")]
    InsufficientPool { requested: usize, available: usize },

    #[error("sub-category {category} has {available} records, test quota is {quota}")]
    InsufficientCategory {
        category: String,
        available: usize,
        quota: usize,
    },

    #[error("{0}")]
    EmptyInput(&'static str),

    #[error("record {id} is missing semantic labels")]
    Unlabeled { id: String },

    #[error("manifest line {line}: {source}")]
    Manifest {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
