use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("header does not match schema: {0}")]
    SchemaMismatch(String),

    #[error("parse error at row {row}, column `{column}`: cannot read {value:?} as a number")]
    Parse { row: usize, column: String, value: String },

    #[error("column `{0}` has no non-missing values; remove it with drop_sparse first")]
    EntirelyMissing(String),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("dataset still contains missing values in column `{0}`")]
    Incomplete(String),

    #[error("empty dataset: {0}")]
    Empty(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("degenerate variance: {0}")]
    Degenerate(String),

    #[error("training failed for `{label}`: {source}")]
    Training {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn training(label: impl Into<String>, source: Error) -> Self {
        Error::Training {
            label: label.into(),
            source: Box::new(source),
        }
    }
}
