use std::path::PathBuf;

/// Errors produced by the retrieval engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate finding id {0:?}")]
    DuplicateId(String),

    #[error("finding {0:?} has empty text")]
    EmptyText(String),

    #[error("finding {id:?} lists CRR reference {reference} more than once")]
    DuplicateCrrRef { id: String, reference: String },

    #[error("finding {finding:?} references unknown measure {measure:?}")]
    UnknownMeasure { finding: String, measure: String },

    #[error("unknown finding id {0:?}")]
    UnknownId(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid CRR reference {input:?}: {reason}")]
    CrrParse { input: String, reason: String },

    #[error("CRR reference {0} is not in the article tree")]
    NotInTree(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vocabulary is empty after tokenization; nothing to score")]
    EmptyVocabulary,

    #[error("embedding for {0:?} is missing")]
    MissingEmbedding(String),

    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("embedding for {0:?} contains a non-finite value")]
    NonFinite(String),

    #[error("embedding for {0:?} is a zero vector")]
    ZeroVector(String),

    #[error("malformed {kind} file: {message}")]
    Format { kind: &'static str, message: String },

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("sample size m={m} exceeds the {available} findings available for down-sampling")]
    SampleTooLarge { m: usize, available: usize },

    #[error("relevant set is empty")]
    EmptyRelevant,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by unreadable or malformed inputs rather than
    /// by the computation itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Format { .. }
                | Error::MissingArtifact(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
