use alloc::string::String;
use core::fmt;

/// Failures while assembling a [`Corpus`](crate::Corpus) from documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    DuplicateId(String),
    EmptyBody(String),
    EmptyCorpus,
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::DuplicateId(id) => write!(f, "duplicate document id `{id}`"),
            CorpusError::EmptyBody(id) => write!(f, "document `{id}` has an empty body"),
            CorpusError::EmptyCorpus => f.write_str("corpus contains no documents"),
        }
    }
}

/// Failures raised by a [`Ranker`](crate::Ranker) or the ranking helpers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankError {
    EmptyQuery,
    InvalidDepth,
    UnknownDocumentId(String),
    /// The external ranker could not be reached or answered with a non-200 status.
    Unreachable(String),
    Timeout,
    MalformedResponse(String),
}

impl fmt::Display for RankError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankError::EmptyQuery => f.write_str("query has no terms"),
            RankError::InvalidDepth => f.write_str("ranking depth k must be at least 1"),
            RankError::UnknownDocumentId(id) => write!(f, "unknown document id `{id}`"),
            RankError::Unreachable(why) => write!(f, "external ranker unreachable: {why}"),
            RankError::Timeout => f.write_str("external ranker timed out"),
            RankError::MalformedResponse(why) => {
                write!(f, "external ranker returned a malformed response: {why}")
            }
        }
    }
}

/// Errors produced by the explanation generators, the builder and the topic model.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    Corpus(CorpusError),
    Rank(RankError),
    DocumentNotInTopK { doc_id: String, k: usize },
    InvalidRequest(&'static str),
    IndexOutOfRange { index: usize, len: usize },
    TermNotInDocument(String),
    EmptyCandidatePool,
    NoNonRelevantDocuments,
    ZeroVector(String),
    EmbeddingProviderUnreachable(String),
    DimensionMismatch { expected: usize, found: usize },
    EmptyVocabulary,
    InvalidHyperparameter(&'static str),
    TopicIndexOutOfRange { index: usize, topics: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Corpus(e) => e.fmt(f),
            Error::Rank(e) => e.fmt(f),
            Error::DocumentNotInTopK { doc_id, k } => {
                write!(f, "document `{doc_id}` is not ranked within the top {k}")
            }
            Error::InvalidRequest(why) => write!(f, "invalid request: {why}"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "sentence index {index} out of range for {len} sentences")
            }
            Error::TermNotInDocument(t) => write!(f, "term `{t}` does not occur in the document"),
            Error::EmptyCandidatePool => {
                f.write_str("document has no terms outside the query to append")
            }
            Error::NoNonRelevantDocuments => f.write_str("no documents are ranked below k"),
            Error::ZeroVector(id) => write!(f, "document `{id}` has an empty vector"),
            Error::EmbeddingProviderUnreachable(why) => {
                write!(f, "embedding provider unreachable: {why}")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "embedding dimension mismatch: expected {expected}, found {found}")
            }
            Error::EmptyVocabulary => f.write_str("no vocabulary left after preprocessing"),
            Error::InvalidHyperparameter(which) => write!(f, "invalid hyperparameter: {which}"),
            Error::TopicIndexOutOfRange { index, topics } => {
                write!(f, "topic {index} out of range for {topics} topics")
            }
        }
    }
}

impl From<CorpusError> for Error {
    fn from(e: CorpusError) -> Self {
        Error::Corpus(e)
    }
}

impl From<RankError> for Error {
    fn from(e: RankError) -> Self {
        Error::Rank(e)
    }
}

impl core::error::Error for CorpusError {}
impl core::error::Error for RankError {}
impl core::error::Error for Error {}
