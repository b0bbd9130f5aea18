//! Inverted index, BM25 scoring and the black-box ranker abstraction.
//!
//! A [`Ranker`] turns `(query, document text)` pairs into relevance scores.
//! Everything above it (top-k ranking, substitute re-ranking and all the
//! explanation generators) only ever sees scores, so the built-in
//! [`Bm25Ranker`] and a remote model are interchangeable.
//!
//! Ordering is always score descending, then document id ascending.
//! Collection statistics are frozen when the index is built; scoring a
//! perturbed document never shifts `df` or the average length.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::{tokenize, Corpus, Query};
use crate::error::{CorpusError, RankError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Corpus-level statistics captured at index build time.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectionStats {
    pub doc_count: usize,
    pub avg_doc_length: f64,
    df: BTreeMap<String, usize>,
}

impl CollectionStats {
    /// Document frequency; unknown terms have `df = 0`.
    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, positive for every `df <= N`.
    pub fn idf(&self, term: &str) -> f64 {
        idf(self.doc_count, self.df(term))
    }

    pub fn vocabulary_size(&self) -> usize {
        self.df.len()
    }
}

pub fn idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let df = df as f64;
    libm::log(1.0 + (n - df + 0.5) / (df + 0.5))
}

/// BM25 contribution of one term occurring `tf` times in a document of
/// `doc_len` tokens.
pub fn bm25_term_weight(
    stats: &CollectionStats,
    params: Bm25Params,
    term: &str,
    tf: usize,
    doc_len: usize,
) -> f64 {
    let tf = tf as f64;
    let norm = if stats.avg_doc_length > 0.0 {
        doc_len as f64 / stats.avg_doc_length
    } else {
        0.0
    };
    let saturation = tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
    stats.idf(term) * saturation
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Position of the document in its corpus.
    pub doc: usize,
    pub tf: usize,
}

#[derive(Debug, Clone)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_length: Vec<usize>,
    stats: CollectionStats,
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus) -> Result<Self, CorpusError> {
        if corpus.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_length = Vec::with_capacity(corpus.len());
        for (pos, doc) in corpus.iter().enumerate() {
            doc_length.push(doc.token_count());
            for (term, tf) in doc.term_frequencies() {
                postings
                    .entry(String::from(term))
                    .or_default()
                    .push(Posting { doc: pos, tf });
            }
        }
        let total: usize = doc_length.iter().sum();
        let stats = CollectionStats {
            doc_count: corpus.len(),
            avg_doc_length: total as f64 / corpus.len() as f64,
            df: postings.iter().map(|(t, p)| (t.clone(), p.len())).collect(),
        };
        Ok(Self { postings, doc_length, stats })
    }

    pub fn stats(&self) -> &CollectionStats {
        &self.stats
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_length(&self, doc: usize) -> Option<usize> {
        self.doc_length.get(doc).copied()
    }

    pub fn tf(&self, term: &str, doc: usize) -> usize {
        self.postings(term)
            .iter()
            .find(|p| p.doc == doc)
            .map_or(0, |p| p.tf)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }
}

/// A document handed to a ranker: its id and the text to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DocText<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

/// A black-box relevance model.
///
/// Implementations must be pure: identical inputs give identical scores.
pub trait Ranker {
    /// One score per document, order-aligned with `docs`.
    fn score_batch(&self, query: &Query, docs: &[DocText<'_>]) -> Result<Vec<f64>, RankError>;

    /// Scores of every corpus document, in corpus order.
    fn score_corpus(&self, query: &Query, corpus: &Corpus) -> Result<Vec<f64>, RankError> {
        let docs: Vec<DocText<'_>> = corpus
            .iter()
            .map(|d| DocText { id: &d.id, text: &d.body })
            .collect();
        self.score_batch(query, &docs)
    }

    fn score_text(&self, query: &Query, id: &str, text: &str) -> Result<f64, RankError> {
        let scores = self.score_batch(query, &[DocText { id, text }])?;
        match scores.as_slice() {
            [s] => Ok(*s),
            other => Err(RankError::MalformedResponse(alloc::format!(
                "expected 1 score, got {}",
                other.len()
            ))),
        }
    }
}

impl<R: Ranker + ?Sized> Ranker for &R {
    fn score_batch(&self, query: &Query, docs: &[DocText<'_>]) -> Result<Vec<f64>, RankError> {
        (**self).score_batch(query, docs)
    }
    fn score_corpus(&self, query: &Query, corpus: &Corpus) -> Result<Vec<f64>, RankError> {
        (**self).score_corpus(query, corpus)
    }
    fn score_text(&self, query: &Query, id: &str, text: &str) -> Result<f64, RankError> {
        (**self).score_text(query, id, text)
    }
}

/// Okapi BM25 over a frozen [`InvertedIndex`].
#[derive(Debug, Clone)]
pub struct Bm25Ranker {
    index: InvertedIndex,
    params: Bm25Params,
}

impl Bm25Ranker {
    pub fn new(index: InvertedIndex) -> Self {
        Self::with_params(index, Bm25Params::default())
    }

    pub fn with_params(index: InvertedIndex, params: Bm25Params) -> Self {
        Self { index, params }
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn term_weight(&self, term: &str, tf: usize, doc_len: usize) -> f64 {
        bm25_term_weight(&self.index.stats, self.params, term, tf, doc_len)
    }

    /// Sum of term weights over the distinct query terms present in `text`.
    pub fn score(&self, query: &Query, text: &str) -> f64 {
        let tokens = tokenize(text);
        let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t.as_str()).or_insert(0) += 1;
        }
        let mut score = 0.0;
        for term in &query.term_set {
            if let Some(&count) = tf.get(term.as_str()) {
                score += self.term_weight(term, count, tokens.len());
            }
        }
        score
    }
}

impl Ranker for Bm25Ranker {
    fn score_batch(&self, query: &Query, docs: &[DocText<'_>]) -> Result<Vec<f64>, RankError> {
        if query.is_empty() {
            return Err(RankError::EmptyQuery);
        }
        Ok(docs.iter().map(|d| self.score(query, d.text)).collect())
    }

    fn score_corpus(&self, query: &Query, corpus: &Corpus) -> Result<Vec<f64>, RankError> {
        if query.is_empty() {
            return Err(RankError::EmptyQuery);
        }
        if corpus.len() != self.index.doc_length.len() {
            // Not the indexed corpus: score the bodies directly.
            return Ok(corpus.iter().map(|d| self.score(query, &d.body)).collect());
        }
        // Same summation order as `score`: query terms ascending.
        let mut scores = alloc::vec![0.0; corpus.len()];
        for term in &query.term_set {
            for p in self.index.postings(term) {
                scores[p.doc] += self.term_weight(term, p.tf, self.index.doc_length[p.doc]);
            }
        }
        Ok(scores)
    }
}

/// Score comparison that treats `0.0` and `-0.0` as equal.
pub fn cmp_scores(a: f64, b: f64) -> Ordering {
    if a == b {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Ranking order between two `(id, score)` pairs: score descending, id ascending.
pub fn ranking_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    cmp_scores(b.1, a.1).then_with(|| a.0.cmp(b.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query: Query,
    pub k: usize,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn rank_of(&self, doc_id: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.doc_id == doc_id).map(|e| e.rank)
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.rank_of(doc_id).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Scores and full ordering of a corpus under one query.
#[derive(Debug, Clone)]
pub struct CorpusRanking<'c> {
    corpus: &'c Corpus,
    scores: Vec<f64>,
    /// Corpus positions in rank order.
    order: Vec<usize>,
    /// `rank[pos]` is the 1-based rank of the document at `pos`.
    rank: Vec<usize>,
}

impl<'c> CorpusRanking<'c> {
    pub fn compute<R: Ranker + ?Sized>(
        ranker: &R,
        corpus: &'c Corpus,
        query: &Query,
    ) -> Result<Self, RankError> {
        if query.is_empty() {
            return Err(RankError::EmptyQuery);
        }
        let scores = ranker.score_corpus(query, corpus)?;
        if scores.len() != corpus.len() {
            return Err(RankError::MalformedResponse(alloc::format!(
                "expected {} scores, got {}",
                corpus.len(),
                scores.len()
            )));
        }
        Ok(Self::from_scores(corpus, scores))
    }

    pub fn from_scores(corpus: &'c Corpus, scores: Vec<f64>) -> Self {
        let docs = corpus.documents();
        let mut order: Vec<usize> = (0..docs.len()).collect();
        order.sort_by(|&a, &b| {
            ranking_order((&docs[a].id, scores[a]), (&docs[b].id, scores[b]))
        });
        let mut rank = alloc::vec![0; docs.len()];
        for (i, &pos) in order.iter().enumerate() {
            rank[pos] = i + 1;
        }
        Self { corpus, scores, order, rank }
    }

    pub fn corpus(&self) -> &'c Corpus {
        self.corpus
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn rank_of_position(&self, pos: usize) -> usize {
        self.rank[pos]
    }

    pub fn rank_of(&self, doc_id: &str) -> Option<usize> {
        self.corpus.position(doc_id).map(|p| self.rank[p])
    }

    /// Rank the document at `pos` would take if it scored `score` while
    /// every other document kept its score.
    pub fn rank_with_substitute(&self, pos: usize, score: f64) -> usize {
        let docs = self.corpus.documents();
        let id = docs[pos].id.as_str();
        1 + docs
            .iter()
            .zip(&self.scores)
            .enumerate()
            .filter(|&(p, (d, &s))| {
                p != pos && ranking_order((&d.id, s), (id, score)) == Ordering::Less
            })
            .count()
    }

    pub fn top_k(&self, query: &Query, k: usize) -> RankedList {
        let docs = self.corpus.documents();
        let entries = self
            .order
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, &pos)| RankedEntry {
                doc_id: docs[pos].id.clone(),
                score: self.scores[pos],
                rank: i + 1,
            })
            .collect();
        RankedList { query: query.clone(), k, entries }
    }
}

pub fn score_document<R: Ranker + ?Sized>(
    ranker: &R,
    query: &Query,
    doc_id: &str,
    doc_text: &str,
) -> Result<f64, RankError> {
    if query.is_empty() {
        return Err(RankError::EmptyQuery);
    }
    ranker.score_text(query, doc_id, doc_text)
}

/// The `min(k, N)` best documents for `query`.
pub fn rank_top_k<R: Ranker + ?Sized>(
    ranker: &R,
    corpus: &Corpus,
    query: &Query,
    k: usize,
) -> Result<RankedList, RankError> {
    if k == 0 {
        return Err(RankError::InvalidDepth);
    }
    Ok(CorpusRanking::compute(ranker, corpus, query)?.top_k(query, k))
}

/// Full-corpus rank of `substituted_id` after replacing its body with
/// `substituted_text`. Other documents keep their original scores.
pub fn rank_of_substitute<R: Ranker + ?Sized>(
    ranker: &R,
    corpus: &Corpus,
    query: &Query,
    substituted_id: &str,
    substituted_text: &str,
) -> Result<usize, RankError> {
    let pos = corpus
        .position(substituted_id)
        .ok_or_else(|| RankError::UnknownDocumentId(substituted_id.into()))?;
    let ranking = CorpusRanking::compute(ranker, corpus, query)?;
    let score = ranker.score_text(query, substituted_id, substituted_text)?;
    Ok(ranking.rank_with_substitute(pos, score))
}
