use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: unknown relation `{name}`")]
    UnknownRelation {
        file: String,
        line: usize,
        name: String,
    },
    #[error("{file}:{line}: schema violation: {message}")]
    Schema {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: unknown split tag `{tag}`")]
    UnknownSplit {
        file: String,
        line: usize,
        tag: String,
    },
    #[error("{0} is empty")]
    EmptyFile(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("duplicate query key `{0}` in run")]
    DuplicateQueryKey(String),
    #[error("run references query key `{0}` that is absent from the qrels")]
    UnknownQueryKey(String),
    #[error("missing label for case `{case}` aspect `{aspect}`")]
    MissingLabel { case: String, aspect: String },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("json: {0}")]
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
