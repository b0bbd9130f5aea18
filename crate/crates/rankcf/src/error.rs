use rankcf_core::{CorpusError, Error, RankError};
use serde::{Deserialize, Serialize};

/// Structured error returned by every endpoint and by the CLI in `--json` mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    pub http_status: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBody {
    pub error: ApiError,
}

impl ApiError {
    pub fn new(code: &str, http_status: u16, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into(), http_status }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new("bad_request", 400, message)
    }

    pub fn unknown_corpus(name: &str) -> Self {
        Self::new("unknown_corpus", 404, format!("no corpus named `{name}`"))
    }

    pub fn not_found(path: &str) -> Self {
        Self::new("not_found", 404, format!("no endpoint at `{path}`"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new("internal", 500, message)
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody { error: self.clone() }
    }
}

impl From<RankError> for ApiError {
    fn from(e: RankError) -> Self {
        let message = e.to_string();
        match e {
            RankError::EmptyQuery => Self::new("empty_query", 400, message),
            RankError::InvalidDepth => Self::new("bad_request", 400, message),
            RankError::UnknownDocumentId(_) => Self::new("unknown_document", 404, message),
            RankError::Unreachable(_) => Self::new("ranker_unreachable", 502, message),
            RankError::Timeout => Self::new("ranker_timeout", 504, message),
            RankError::MalformedResponse(_) => Self::new("ranker_malformed_response", 502, message),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Corpus(CorpusError::EmptyCorpus) => Self::new("empty_corpus", 422, message),
            Error::Corpus(_) => Self::new("bad_request", 400, message),
            Error::Rank(r) => r.into(),
            Error::DocumentNotInTopK { .. } => Self::new("doc_not_in_top_k", 422, message),
            Error::InvalidRequest(_) => Self::new("bad_request", 400, message),
            Error::IndexOutOfRange { .. } => Self::new("index_out_of_range", 400, message),
            Error::TermNotInDocument(_) => Self::new("term_not_in_document", 400, message),
            Error::EmptyCandidatePool => Self::new("empty_candidate_pool", 422, message),
            Error::NoNonRelevantDocuments => Self::new("no_non_relevant_documents", 422, message),
            Error::ZeroVector(_) => Self::new("zero_vector", 422, message),
            Error::EmbeddingProviderUnreachable(_) => {
                Self::new("embedding_provider_unreachable", 502, message)
            }
            Error::DimensionMismatch { .. } => Self::new("dimension_mismatch", 502, message),
            Error::EmptyVocabulary => Self::new("empty_vocabulary", 422, message),
            Error::InvalidHyperparameter(_) => Self::new("invalid_hyperparameter", 400, message),
            Error::TopicIndexOutOfRange { .. } => Self::new("topic_index_out_of_range", 400, message),
        }
    }
}
