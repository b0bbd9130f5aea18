//! Transport-independent request handling.
//!
//! Every endpoint is a method on [`Service`] taking a typed request and
//! returning a typed response or an [`ApiError`]. The HTTP server and the
//! CLI both serialize these responses with `serde_json::to_string`, which
//! keeps their payloads byte-identical.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use rankcf_core::builder::{rerank_with_edit, Direction};
use rankcf_core::cf_document::{
    generate_document_counterfactuals, DocumentCaps, DocumentCfRequest, ImportanceMode,
};
use rankcf_core::cf_instance::{
    embedding_counterfactual_instances, sampled_counterfactual_instances, InstanceCfRequest,
    InstanceExplanation, InstanceVariant, LexicalEmbeddings, VectorSpace,
};
use rankcf_core::cf_query::{generate_query_counterfactuals, QueryCaps, QueryCfRequest};
use rankcf_core::ranking::rank_top_k;
use rankcf_core::stopwords::Stopwords;
use rankcf_core::topics::{fit_lda, LdaConfig};
use rankcf_core::{Bm25Ranker, Corpus, Document, InvertedIndex, Query, Ranker};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::io::{load_corpus, LoadError};
use crate::remote::{ExternalEmbeddings, ExternalRanker};

pub const DEFAULT_SAMPLE_SIZE: usize = 50;
pub const DEFAULT_TOP_TERMS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RankerBinding {
    #[default]
    Builtin,
    External { endpoint: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub ranker: RankerBinding,
    #[serde(default)]
    pub embedding_endpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub corpora: Vec<CorpusConfig>,
    pub document_caps: DocumentCapsBody,
    pub query_caps: QueryCapsBody,
    pub request_timeout_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8091,
            corpora: Vec::new(),
            document_caps: DocumentCapsBody::default(),
            query_caps: QueryCapsBody::default(),
            request_timeout_secs: 30,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("corpus `{name}` failed to load: {source}")]
    CorpusLoad { name: String, source: LoadError },
    #[error("corpus `{0}` is registered twice")]
    DuplicateCorpus(String),
}

/// A loaded corpus with its index and ranker binding.
#[derive(Debug)]
pub struct CorpusHandle {
    pub corpus: Corpus,
    pub bm25: Bm25Ranker,
    pub external: Option<ExternalRanker>,
    pub embeddings: Option<ExternalEmbeddings>,
}

impl CorpusHandle {
    pub fn new(corpus: Corpus) -> Result<Self, LoadError> {
        let index = InvertedIndex::build(&corpus)?;
        Ok(Self { corpus, bm25: Bm25Ranker::new(index), external: None, embeddings: None })
    }

    pub fn ranker(&self) -> &(dyn Ranker + Send + Sync) {
        match &self.external {
            Some(r) => r,
            None => &self.bm25,
        }
    }
}

#[derive(Debug, Default)]
pub struct Service {
    corpora: BTreeMap<String, CorpusHandle>,
    document_caps: DocumentCapsBody,
    query_caps: QueryCapsBody,
}

impl Service {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_config(config: &ServiceConfig) -> Result<Self, ConfigError> {
        let timeout = Duration::from_secs(config.request_timeout_secs);
        let mut service = Self {
            corpora: BTreeMap::new(),
            document_caps: config.document_caps,
            query_caps: config.query_caps,
        };
        for entry in &config.corpora {
            let load = |source| ConfigError::CorpusLoad { name: entry.name.clone(), source };
            let corpus = load_corpus(&entry.path).map_err(load)?;
            let mut handle = CorpusHandle::new(corpus).map_err(load)?;
            if let RankerBinding::External { endpoint } = &entry.ranker {
                handle.external = Some(ExternalRanker::with_timeout(endpoint.clone(), timeout));
            }
            if let Some(endpoint) = &entry.embedding_endpoint {
                handle.embeddings = Some(ExternalEmbeddings::with_timeout(endpoint.clone(), timeout));
            }
            if service.corpora.insert(entry.name.clone(), handle).is_some() {
                return Err(ConfigError::DuplicateCorpus(entry.name.clone()));
            }
        }
        Ok(service)
    }

    pub fn insert(&mut self, name: impl Into<String>, handle: CorpusHandle) {
        self.corpora.insert(name.into(), handle);
    }

    pub fn handle(&self, name: &str) -> Result<&CorpusHandle, ApiError> {
        self.corpora.get(name).ok_or_else(|| ApiError::unknown_corpus(name))
    }

    pub fn corpus_names(&self) -> impl Iterator<Item = &str> {
        self.corpora.keys().map(String::as_str)
    }

    pub fn corpora(&self) -> CorporaResponse {
        CorporaResponse { corpora: self.corpora.keys().cloned().collect() }
    }

    pub fn rank(&self, req: &RankRequest) -> Result<RankResponse, ApiError> {
        let h = self.handle(&req.corpus)?;
        let list = rank_top_k(h.ranker(), &h.corpus, &Query::new(&req.query), req.k)?;
        let entries = list
            .entries
            .into_iter()
            .map(|e| RankEntry {
                title: title(&h.corpus, &e.doc_id),
                doc_id: e.doc_id,
                score: e.score,
                rank: e.rank,
            })
            .collect();
        Ok(RankResponse { entries })
    }

    pub fn explain_document(
        &self,
        req: &DocumentExplanationRequest,
    ) -> Result<DocumentExplanationResponse, ApiError> {
        let h = self.handle(&req.corpus)?;
        let caps = req.caps.unwrap_or(self.document_caps);
        let request = DocumentCfRequest {
            doc_id: req.doc_id.clone(),
            query: Query::new(&req.query),
            k: req.k,
            n: req.n,
            caps: caps.into(),
            importance: req.importance.unwrap_or_default().into(),
            prune_supersets: req.prune_supersets.unwrap_or(false),
        };
        let out = generate_document_counterfactuals(h.ranker(), &h.corpus, &request)?;
        let doc = h.corpus.get(&req.doc_id).expect("generator checked the id");
        Ok(DocumentExplanationResponse {
            no_valid_counterfactual: out.no_valid_counterfactual(),
            evaluations: out.evaluations,
            explanations: out
                .explanations
                .into_iter()
                .map(|p| DocumentExplanation {
                    removed_texts: p.removed.iter().map(|&i| doc.sentences[i].text.clone()).collect(),
                    removed_indices: p.removed,
                    importance: p.importance,
                    new_rank: p.new_rank,
                    valid: p.valid,
                })
                .collect(),
        })
    }

    pub fn explain_query(
        &self,
        req: &QueryExplanationRequest,
    ) -> Result<QueryExplanationResponse, ApiError> {
        let h = self.handle(&req.corpus)?;
        let caps = req.caps.unwrap_or(self.query_caps);
        let request = QueryCfRequest {
            doc_id: req.doc_id.clone(),
            query: Query::new(&req.query),
            k: req.k,
            n: req.n,
            threshold: req.threshold,
            caps: caps.into(),
        };
        let out = generate_query_counterfactuals(h.ranker(), &h.corpus, &request, &Stopwords::default())?;
        Ok(QueryExplanationResponse {
            evaluations: out.evaluations,
            explanations: out
                .explanations
                .into_iter()
                .map(|a| QueryExplanation {
                    appended_terms: a.appended,
                    score: a.score,
                    augmented_query: a.augmented_query.raw,
                    new_rank: a.new_rank,
                    valid: a.valid,
                })
                .collect(),
        })
    }

    pub fn explain_instance(
        &self,
        req: &InstanceExplanationRequest,
    ) -> Result<InstanceExplanationResponse, ApiError> {
        let h = self.handle(&req.corpus)?;
        let variant = match req.variant {
            InstanceVariantBody::CosineSampled => InstanceVariant::CosineSampled {
                sample_size: req.s.unwrap_or(DEFAULT_SAMPLE_SIZE),
                seed: req.seed.unwrap_or(0),
            },
            InstanceVariantBody::EmbeddingNearest => InstanceVariant::EmbeddingNearest,
        };
        let request = InstanceCfRequest {
            doc_id: req.doc_id.clone(),
            query: Query::new(&req.query),
            k: req.k,
            n: req.n,
            variant,
        };
        let space = VectorSpace::from_ranker(&h.bm25);
        let found: Vec<InstanceExplanation> = match (variant, &h.embeddings) {
            (InstanceVariant::CosineSampled { .. }, _) => {
                sampled_counterfactual_instances(h.ranker(), &h.corpus, &space, &request)?
            }
            (InstanceVariant::EmbeddingNearest, Some(remote)) => {
                embedding_counterfactual_instances(h.ranker(), &h.corpus, remote, &request)?
            }
            (InstanceVariant::EmbeddingNearest, None) => embedding_counterfactual_instances(
                h.ranker(),
                &h.corpus,
                &LexicalEmbeddings(space),
                &request,
            )?,
        };
        Ok(InstanceExplanationResponse {
            explanations: found
                .into_iter()
                .map(|e| {
                    let doc = h.corpus.get(&e.doc_id).expect("ids come from the corpus");
                    InstanceEntry {
                        title: doc.title.clone(),
                        body: doc.body.clone(),
                        doc_id: e.doc_id,
                        similarity: e.similarity,
                        corpus_rank: e.corpus_rank,
                    }
                })
                .collect(),
        })
    }

    pub fn builder_rerank(&self, req: &BuilderRequest) -> Result<BuilderResponse, ApiError> {
        let h = self.handle(&req.corpus)?;
        let res = rerank_with_edit(
            h.ranker(),
            &h.corpus,
            &Query::new(&req.query),
            req.k,
            &req.doc_id,
            &req.edited_body,
        )?;
        Ok(BuilderResponse {
            valid: res.valid,
            deltas: res
                .deltas
                .into_iter()
                .map(|d| DeltaEntry {
                    doc_id: d.doc_id,
                    old_rank: d.old_rank,
                    new_rank: d.new_rank,
                    direction: d.direction.into(),
                    is_hidden_entrant: d.is_hidden_entrant,
                })
                .collect(),
        })
    }

    pub fn topics(&self, req: &TopicsRequest) -> Result<TopicsResponse, ApiError> {
        let h = self.handle(&req.corpus)?;
        let list = rank_top_k(h.ranker(), &h.corpus, &Query::new(&req.query), req.k)?;
        let docs: Vec<&Document> = list
            .entries
            .iter()
            .filter_map(|e| h.corpus.get(&e.doc_id))
            .collect();
        let defaults = LdaConfig::default();
        let config = LdaConfig {
            topics: req.topics.unwrap_or(defaults.topics),
            iterations: req.iterations.unwrap_or(defaults.iterations),
            seed: req.seed.unwrap_or(0),
            ..defaults
        };
        let model = fit_lda(&docs, &config)?;
        let m = req.terms.unwrap_or(DEFAULT_TOP_TERMS);
        let topics = (0..model.topic_count())
            .map(|t| {
                let top_terms = model
                    .top_terms(t, m)
                    .expect("topic index in range")
                    .into_iter()
                    .map(|(term, probability)| TermWeight { term, probability })
                    .collect();
                Topic { index: t, top_terms }
            })
            .collect();
        Ok(TopicsResponse { topics })
    }
}

fn title(corpus: &Corpus, id: &str) -> Option<String> {
    corpus.get(id).and_then(|d| d.title.clone())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorporaResponse {
    pub corpora: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankRequest {
    pub corpus: String,
    pub query: String,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankEntry {
    pub doc_id: String,
    pub title: Option<String>,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankResponse {
    pub entries: Vec<RankEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DocumentCapsBody {
    pub max_candidate_sentences: usize,
    pub max_removals: usize,
    pub max_evaluations: usize,
}

impl Default for DocumentCapsBody {
    fn default() -> Self {
        let d = DocumentCaps::default();
        Self {
            max_candidate_sentences: d.max_candidate_sentences,
            max_removals: d.max_removals,
            max_evaluations: d.max_evaluations,
        }
    }
}

impl From<DocumentCapsBody> for DocumentCaps {
    fn from(c: DocumentCapsBody) -> Self {
        DocumentCaps {
            max_candidate_sentences: c.max_candidate_sentences,
            max_removals: c.max_removals,
            max_evaluations: c.max_evaluations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryCapsBody {
    pub max_candidate_terms: usize,
    pub max_append: usize,
    pub max_evaluations: usize,
}

impl Default for QueryCapsBody {
    fn default() -> Self {
        let d = QueryCaps::default();
        Self {
            max_candidate_terms: d.max_candidate_terms,
            max_append: d.max_append,
            max_evaluations: d.max_evaluations,
        }
    }
}

impl From<QueryCapsBody> for QueryCaps {
    fn from(c: QueryCapsBody) -> Self {
        QueryCaps {
            max_candidate_terms: c.max_candidate_terms,
            max_append: c.max_append,
            max_evaluations: c.max_evaluations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceBody {
    #[default]
    Occurrences,
    DistinctTerms,
}

impl From<ImportanceBody> for ImportanceMode {
    fn from(m: ImportanceBody) -> Self {
        match m {
            ImportanceBody::Occurrences => ImportanceMode::Occurrences,
            ImportanceBody::DistinctTerms => ImportanceMode::DistinctTerms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentExplanationRequest {
    pub corpus: String,
    pub query: String,
    pub k: usize,
    pub doc_id: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<DocumentCapsBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune_supersets: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<ImportanceBody>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentExplanation {
    pub removed_indices: Vec<usize>,
    pub removed_texts: Vec<String>,
    pub importance: usize,
    pub new_rank: usize,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentExplanationResponse {
    pub explanations: Vec<DocumentExplanation>,
    pub no_valid_counterfactual: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryExplanationRequest {
    pub corpus: String,
    pub query: String,
    pub k: usize,
    pub doc_id: String,
    pub n: usize,
    pub threshold: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<QueryCapsBody>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryExplanation {
    pub appended_terms: Vec<String>,
    pub score: f64,
    pub augmented_query: String,
    pub new_rank: usize,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryExplanationResponse {
    pub explanations: Vec<QueryExplanation>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceVariantBody {
    CosineSampled,
    EmbeddingNearest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceExplanationRequest {
    pub corpus: String,
    pub query: String,
    pub k: usize,
    pub doc_id: String,
    pub n: usize,
    pub variant: InstanceVariantBody,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceEntry {
    pub doc_id: String,
    pub title: Option<String>,
    pub body: String,
    pub similarity: f64,
    pub corpus_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceExplanationResponse {
    pub explanations: Vec<InstanceEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderRequest {
    pub corpus: String,
    pub query: String,
    pub k: usize,
    pub doc_id: String,
    pub edited_body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionBody {
    Raised,
    Lowered,
    Unchanged,
}

impl From<Direction> for DirectionBody {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Raised => DirectionBody::Raised,
            Direction::Lowered => DirectionBody::Lowered,
            Direction::Unchanged => DirectionBody::Unchanged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaEntry {
    pub doc_id: String,
    pub old_rank: usize,
    pub new_rank: usize,
    pub direction: DirectionBody,
    pub is_hidden_entrant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderResponse {
    pub deltas: Vec<DeltaEntry>,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicsRequest {
    pub corpus: String,
    pub query: String,
    pub k: usize,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub topics: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Terms listed per topic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermWeight {
    pub term: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topic {
    pub index: usize,
    pub top_terms: Vec<TermWeight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicsResponse {
    pub topics: Vec<Topic>,
}
