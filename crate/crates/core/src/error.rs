use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown emotion label `{0}`")]
    UnknownLabel(String),
    #[error("all counts are zero")]
    AllZeroCounts,
    #[error("no parts to mix")]
    EmptyInput,
    #[error("all mixing weights are zero")]
    AllZeroWeights,
    #[error("sample set contains no valid emotions")]
    EmptySampleSet,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("history turn {index} is missing its {missing}")]
    IncompleteHistoryTurn { index: usize, missing: &'static str },
    #[error("malformed conversation at byte {offset}: {reason}")]
    MalformedFormat { offset: usize, reason: String },
    #[error("text contains the reserved token `{0}`")]
    ReservedToken(&'static str),
    #[error("prompt is empty")]
    EmptyPrompt,

    #[error("backend unavailable after {attempts} attempt(s): {reason}")]
    BackendUnavailable { attempts: u32, reason: String },
    #[error("backend returned an unusable response: {0}")]
    BackendProtocol(String),
    #[error("all {discarded} sampled emotions were out of vocabulary")]
    AllSamplesDiscarded { discarded: usize },
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session has no classified turns")]
    EmptySession,

    #[error("reference set is empty")]
    EmptyReferenceSet,
    #[error("unknown reference `{0}`")]
    UnknownReference(String),
    #[error("corpus has no segments after filtering")]
    EmptyCorpusAfterSegmentation,
    #[error("schema violation at `{path}`: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("registry needs at least one {0} reference for screening")]
    MissingPolarityClass(&'static str),

    #[error("malformed dataset: {0}")]
    MalformedDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::SchemaViolation {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for failures that originate in the classifier backend.
    pub fn is_backend(&self) -> bool {
        matches!(self, Error::BackendUnavailable { .. } | Error::BackendProtocol(_))
    }
}
