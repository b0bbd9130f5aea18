//! Query-augmentation counterfactuals.
//!
//! Candidate terms come from the instance document, minus query terms and
//! stopwords, and are weighted by TF-IDF against the top-k set. Term
//! combinations are tried by size, then by summed weight, and each
//! augmented query re-ranks the whole corpus.

use alloc::string::String;
use alloc::vec::Vec;

use crate::cf_document::for_each_combination;
use crate::corpus::{Corpus, Document, Query};
use crate::error::Error;
use crate::ranking::{cmp_scores, CorpusRanking, Ranker};
use crate::stopwords::Stopwords;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryCaps {
    pub max_candidate_terms: usize,
    pub max_append: usize,
    pub max_evaluations: usize,
}

impl Default for QueryCaps {
    fn default() -> Self {
        Self { max_candidate_terms: 15, max_append: 4, max_evaluations: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryCfRequest {
    pub doc_id: String,
    pub query: Query,
    pub k: usize,
    pub n: usize,
    /// Rank the document must reach (inclusive).
    pub threshold: usize,
    pub caps: QueryCaps,
}

impl QueryCfRequest {
    pub fn new(doc_id: impl Into<String>, query: Query, k: usize, n: usize, threshold: usize) -> Self {
        Self { doc_id: doc_id.into(), query, k, n, threshold, caps: QueryCaps::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTerm {
    pub term: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAugmentation {
    /// Appended terms in candidate-list order.
    pub appended: Vec<String>,
    pub score: f64,
    pub augmented_query: Query,
    pub new_rank: usize,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryCfOutcome {
    pub explanations: Vec<QueryAugmentation>,
    /// Augmented queries ranked against the corpus.
    pub evaluations: usize,
}

/// `tf(term, doc) * ln(k / df')`, where `df'` counts the ranked documents
/// containing `term` and `k` is the size of the ranked set.
pub fn tfidf_score(term: &str, doc: &Document, ranked_docs: &[&Document]) -> Result<f64, Error> {
    let tf = doc.tokens().filter(|t| *t == term).count();
    if tf == 0 {
        return Err(Error::TermNotInDocument(term.into()));
    }
    let df = ranked_docs
        .iter()
        .filter(|d| d.tokens().any(|t| t == term))
        .count()
        .max(1);
    Ok(tf as f64 * libm::log(ranked_docs.len() as f64 / df as f64))
}

/// Document terms eligible for appending, best first.
pub fn candidate_terms(
    doc: &Document,
    query: &Query,
    ranked_docs: &[&Document],
    stopwords: &Stopwords,
    max_terms: usize,
) -> Vec<ScoredTerm> {
    let mut scored: Vec<ScoredTerm> = doc
        .term_frequencies()
        .into_keys()
        .filter(|t| !query.contains(t) && !stopwords.contains(t))
        .map(|t| ScoredTerm {
            term: t.into(),
            score: tfidf_score(t, doc, ranked_docs).unwrap_or(0.0),
        })
        .collect();
    scored.sort_by(|a, b| cmp_scores(b.score, a.score).then_with(|| a.term.cmp(&b.term)));
    scored.truncate(max_terms);
    scored
}

struct Combination {
    positions: Vec<usize>,
    score: f64,
}

fn level(pool: &[ScoredTerm], size: usize) -> Vec<Combination> {
    let mut out = Vec::new();
    for_each_combination(pool.len(), size, |positions| {
        let score = positions.iter().map(|&p| pool[p].score).sum();
        out.push(Combination { positions: positions.to_vec(), score });
    });
    out.sort_by(|a, b| {
        cmp_scores(b.score, a.score).then_with(|| {
            let ta = a.positions.iter().map(|&p| pool[p].term.as_str());
            let tb = b.positions.iter().map(|&p| pool[p].term.as_str());
            ta.cmp(tb)
        })
    });
    out
}

pub fn generate_query_counterfactuals<R: Ranker + ?Sized>(
    ranker: &R,
    corpus: &Corpus,
    request: &QueryCfRequest,
    stopwords: &Stopwords,
) -> Result<QueryCfOutcome, Error> {
    let caps = request.caps;
    if request.n == 0 || request.threshold == 0 || request.threshold > request.k {
        return Err(Error::InvalidRequest("need n >= 1 and 1 <= threshold <= k"));
    }
    if caps.max_candidate_terms == 0 || caps.max_append == 0 || caps.max_evaluations == 0 {
        return Err(Error::InvalidRequest("caps must be at least 1"));
    }
    let ranking = CorpusRanking::compute(ranker, corpus, &request.query)?;
    let doc = corpus
        .get(&request.doc_id)
        .filter(|d| ranking.rank_of(&d.id).is_some_and(|r| r <= request.k))
        .ok_or_else(|| Error::DocumentNotInTopK { doc_id: request.doc_id.clone(), k: request.k })?;
    let ranked_docs: Vec<&Document> = ranking
        .order()
        .iter()
        .take(request.k)
        .map(|&p| &corpus.documents()[p])
        .collect();
    let pool = candidate_terms(doc, &request.query, &ranked_docs, stopwords, caps.max_candidate_terms);
    if pool.is_empty() {
        return Err(Error::EmptyCandidatePool);
    }

    let mut explanations = Vec::new();
    let mut evaluations = 0;
    'sizes: for size in 1..=caps.max_append.min(pool.len()) {
        for combo in level(&pool, size) {
            if evaluations == caps.max_evaluations {
                break 'sizes;
            }
            let appended: Vec<String> = combo.positions.iter().map(|&p| pool[p].term.clone()).collect();
            let augmented_query = request.query.augmented(&appended);
            let rerank = CorpusRanking::compute(ranker, corpus, &augmented_query)?;
            evaluations += 1;
            let new_rank = rerank.rank_of(&doc.id).unwrap_or(usize::MAX);
            if new_rank <= request.threshold {
                explanations.push(QueryAugmentation {
                    appended,
                    score: combo.score,
                    augmented_query,
                    new_rank,
                    valid: true,
                });
                if explanations.len() == request.n {
                    break 'sizes;
                }
            }
        }
    }
    Ok(QueryCfOutcome { explanations, evaluations })
}
