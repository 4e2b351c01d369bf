use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("missing column `{0}` in input header")]
    MissingColumn(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("partition error: silo {silo} has {rows} row(s), at least 2 required")]
    Partition { silo: u32, rows: usize },

    #[error("degenerate class counts (positives: {n_pos}, negatives: {n_neg}); class weight undefined")]
    DegenerateClass { n_pos: usize, n_neg: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("cache does not match parameters: {0}")]
    StaleCache(String),

    #[error("loss undefined on an empty batch")]
    EmptyBatch,

    #[error("empty evaluation set")]
    EmptyEvaluation,

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("unknown reference: {0}")]
    Reference(String),

    #[error("incompatible model file: {0}")]
    IncompatibleModel(String),

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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
