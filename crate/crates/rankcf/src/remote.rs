//! HTTP clients for external rankers and embedding providers.
//!
//! Ranker protocol: `POST <endpoint>/score` with
//! `{"query": "...", "docs": [{"id": "...", "text": "..."}]}`, answered by
//! `{"scores": [..]}` aligned with `docs`.
//!
//! Embedding protocol: `POST <endpoint>/embed` with `{"docs": [...]}`,
//! answered by `{"vectors": [[..], ..]}` aligned with `docs`, all of one
//! dimension.

use std::time::Duration;

use rankcf_core::cf_instance::{dense_cosine, EmbeddingProvider};
use rankcf_core::ranking::DocText;
use rankcf_core::{Error, Query, RankError, Ranker};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDoc {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub query: String,
    pub docs: Vec<WireDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub docs: Vec<WireDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
}

fn wire_docs(docs: &[DocText<'_>]) -> Vec<WireDoc> {
    docs.iter()
        .map(|d| WireDoc { id: d.id.to_owned(), text: d.text.to_owned() })
        .collect()
}

fn url(endpoint: &str, path: &str) -> String {
    format!("{}/{}", endpoint.trim_end_matches('/'), path)
}

fn client(timeout: Duration) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .expect("http client configuration is static")
}

enum CallError {
    Unreachable(String),
    Timeout,
    Malformed(String),
}

fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    client: &reqwest::blocking::Client,
    url: &str,
    body: &Req,
) -> Result<Resp, CallError> {
    let transport = |e: reqwest::Error| {
        if e.is_timeout() {
            CallError::Timeout
        } else {
            CallError::Unreachable(e.to_string())
        }
    };
    let resp = client.post(url).json(body).send().map_err(transport)?;
    if resp.status() != reqwest::StatusCode::OK {
        return Err(CallError::Unreachable(format!("{url} answered {}", resp.status())));
    }
    let bytes = resp.bytes().map_err(transport)?;
    serde_json::from_slice(&bytes).map_err(|e| CallError::Malformed(e.to_string()))
}

/// A ranker reached over the scoring protocol.
#[derive(Debug, Clone)]
pub struct ExternalRanker {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl ExternalRanker {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_timeout(endpoint, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self { endpoint: endpoint.into(), client: client(timeout) }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl Ranker for ExternalRanker {
    fn score_batch(&self, query: &Query, docs: &[DocText<'_>]) -> Result<Vec<f64>, RankError> {
        if query.is_empty() {
            return Err(RankError::EmptyQuery);
        }
        score_with(&self.client, &self.endpoint, &query.raw, docs)
    }
}

/// One request against `<endpoint>/score`.
pub fn score_external(
    endpoint: &str,
    query: &str,
    docs: &[DocText<'_>],
    timeout: Duration,
) -> Result<Vec<f64>, RankError> {
    score_with(&client(timeout), endpoint, query, docs)
}

fn score_with(
    client: &reqwest::blocking::Client,
    endpoint: &str,
    query: &str,
    docs: &[DocText<'_>],
) -> Result<Vec<f64>, RankError> {
    if docs.is_empty() {
        return Ok(Vec::new());
    }
    let req = ScoreRequest { query: query.to_owned(), docs: wire_docs(docs) };
    let resp: ScoreResponse = post(client, &url(endpoint, "score"), &req).map_err(|e| match e {
        CallError::Unreachable(why) => RankError::Unreachable(why),
        CallError::Timeout => RankError::Timeout,
        CallError::Malformed(why) => RankError::MalformedResponse(why),
    })?;
    if resp.scores.len() != docs.len() {
        return Err(RankError::MalformedResponse(format!(
            "expected {} scores, got {}",
            docs.len(),
            resp.scores.len()
        )));
    }
    Ok(resp.scores)
}

/// Dense embeddings from an embedding service, compared by cosine.
#[derive(Debug, Clone)]
pub struct ExternalEmbeddings {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl ExternalEmbeddings {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_timeout(endpoint, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self { endpoint: endpoint.into(), client: client(timeout) }
    }
}

impl EmbeddingProvider for ExternalEmbeddings {
    type Embedding = Vec<f64>;

    fn embed(&self, docs: &[DocText<'_>]) -> Result<Vec<Vec<f64>>, Error> {
        if docs.is_empty() {
            return Ok(Vec::new());
        }
        let req = EmbedRequest { docs: wire_docs(docs) };
        let resp: EmbedResponse =
            post(&self.client, &url(&self.endpoint, "embed"), &req).map_err(|e| match e {
                CallError::Unreachable(why) | CallError::Malformed(why) => {
                    Error::EmbeddingProviderUnreachable(why)
                }
                CallError::Timeout => Error::EmbeddingProviderUnreachable("timed out".into()),
            })?;
        if resp.vectors.len() != docs.len() {
            return Err(Error::EmbeddingProviderUnreachable(format!(
                "expected {} vectors, got {}",
                docs.len(),
                resp.vectors.len()
            )));
        }
        let dim = resp.vectors[0].len();
        if let Some(bad) = resp.vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
        }
        Ok(resp.vectors)
    }

    fn similarity(&self, a: &Vec<f64>, b: &Vec<f64>) -> Result<f64, Error> {
        dense_cosine(a, b)
    }
}
