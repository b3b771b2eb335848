use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file} line {line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("non-finite or missing value in {file} at row '{row}', column '{column}'")]
    NonFinite {
        file: String,
        row: String,
        column: String,
    },

    #[error("duplicate identifier '{id}' in {what}")]
    DuplicateId { what: String, id: String },

    #[error("sample mismatch: {0}")]
    SampleMismatch(String),

    #[error("invalid covariate column '{name}': {reason}")]
    InvalidCovariate { name: String, reason: String },

    #[error("unknown covariate '{0}'")]
    UnknownCovariate(String),

    #[error("invalid model space: {0}")]
    ModelSpace(String),

    #[error("design is rank deficient (column {column})")]
    RankDeficient { column: usize },

    #[error("too few observations: n = {n}, need more than {required}")]
    TooFewObservations { n: usize, required: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no fittable model for gene '{0}'")]
    NoFittableModel(String),

    #[error("empty selection")]
    EmptySelection,

    #[error("missing truth: {0}")]
    MissingTruth(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
