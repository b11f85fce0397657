use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown format `{0}` (expected jsonl or csv)")]
    UnknownFormat(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate researcher_key `{0}` in master list")]
    DuplicateResearcherKey(String),

    #[error("source author id `{source_id}` is claimed by master records `{first}` and `{second}`")]
    ConflictingSourceId {
        source_id: String,
        first: String,
        second: String,
    },

    #[error("researcher `{researcher}` is not an author of publication `{pub_id}`")]
    NotAnAuthor { researcher: String, pub_id: String },

    #[error("unknown indicator `{0}`")]
    UnknownIndicator(String),

    #[error("unknown researcher `{0}`")]
    UnknownResearcher(String),

    #[error("unknown call `{0}`")]
    UnknownCall(String),

    #[error("dimension mismatch for `{doc_id}`: expected {expected}, found {found}")]
    DimensionMismatch {
        doc_id: String,
        expected: usize,
        found: usize,
    },

    #[error("vector for `{0}` contains a non-finite component")]
    NonFiniteVector(String),

    #[error("duplicate vector for doc_id `{0}`")]
    DuplicateVector(String),

    #[error("model tag mismatch for `{doc_id}`: store is `{expected}`, vector is `{found}`")]
    ModelTagMismatch {
        doc_id: String,
        expected: String,
        found: String,
    },

    #[error("missing vector for doc_id `{0}`")]
    MissingVector(String),

    #[error("embedding provider failed on `{doc_id}`: {message}")]
    Provider { doc_id: String, message: String },

    #[error("cannot aggregate an empty similarity list")]
    EmptyAggregate,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem or a subprocess rather than by input content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Provider { .. })
    }
}
