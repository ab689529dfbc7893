use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("clustering did not reach label purity within depth {max_depth}; impure clusters: {}", .impure.join(", "))]
    ImpureClusters {
        max_depth: usize,
        impure: Vec<String>,
    },

    #[error(
        "points with identical features carry conflicting labels {labels:?} (cluster {cluster})"
    )]
    ConflictingDuplicates { cluster: String, labels: Vec<usize> },

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("witness failed re-validation by forward evaluation: {0}")]
    WitnessValidation(String),

    #[error("grid oracle refused: {estimated} points exceed the bound of {bound}")]
    GridTooLarge { estimated: f64, bound: u64 },

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
