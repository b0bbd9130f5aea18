//! Sentence-removal counterfactuals.
//!
//! Sentences are scored by how many query terms they carry. Candidate
//! removal sets are walked by size first, then by total importance
//! (descending), then by index tuple. Each candidate body is re-scored
//! against the frozen ranking; the first valid set found therefore has
//! the smallest size any valid set has within the caps.

use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Corpus, Document, Query, Sentence};
use crate::error::Error;
use crate::ranking::{CorpusRanking, Ranker};

/// How [`sentence_importance`] counts query-term hits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImportanceMode {
    /// Every token position whose term is in the query.
    #[default]
    Occurrences,
    /// Distinct query terms present in the sentence.
    DistinctTerms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DocumentCaps {
    pub max_candidate_sentences: usize,
    pub max_removals: usize,
    pub max_evaluations: usize,
}

impl Default for DocumentCaps {
    fn default() -> Self {
        Self { max_candidate_sentences: 20, max_removals: 5, max_evaluations: 10_000 }
    }
}

impl DocumentCaps {
    fn validate(&self) -> Result<(), Error> {
        if self.max_candidate_sentences == 0 || self.max_removals == 0 || self.max_evaluations == 0
        {
            return Err(Error::InvalidRequest("caps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentCfRequest {
    pub doc_id: String,
    pub query: Query,
    pub k: usize,
    pub n: usize,
    pub caps: DocumentCaps,
    pub importance: ImportanceMode,
    /// Skip candidates that contain an already returned removal set.
    pub prune_supersets: bool,
}

impl DocumentCfRequest {
    pub fn new(doc_id: impl Into<String>, query: Query, k: usize, n: usize) -> Self {
        Self {
            doc_id: doc_id.into(),
            query,
            k,
            n,
            caps: DocumentCaps::default(),
            importance: ImportanceMode::default(),
            prune_supersets: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePerturbation {
    /// Removed sentence indices, ascending.
    pub removed: Vec<usize>,
    pub importance: usize,
    pub new_rank: usize,
    pub valid: bool,
}

impl SentencePerturbation {
    pub fn size(&self) -> usize {
        self.removed.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentCfOutcome {
    /// Valid perturbations in discovery order.
    pub explanations: Vec<SentencePerturbation>,
    /// Perturbed documents sent to the ranker.
    pub evaluations: usize,
}

impl DocumentCfOutcome {
    /// The candidate stream ran out without a single valid perturbation.
    pub fn no_valid_counterfactual(&self) -> bool {
        self.explanations.is_empty()
    }
}

pub fn sentence_importance(sentence: &Sentence, query: &Query) -> usize {
    sentence_importance_with(sentence, query, ImportanceMode::Occurrences)
}

pub fn sentence_importance_with(sentence: &Sentence, query: &Query, mode: ImportanceMode) -> usize {
    match mode {
        ImportanceMode::Occurrences => {
            sentence.tokens.iter().filter(|t| query.contains(t)).count()
        }
        ImportanceMode::DistinctTerms => query
            .term_set
            .iter()
            .filter(|term| sentence.tokens.iter().any(|t| t == *term))
            .count(),
    }
}

/// One removal set emitted by [`enumerate_candidates`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub indices: Vec<usize>,
    pub importance: usize,
}

/// Lazily produces removal sets one size level at a time.
#[derive(Debug, Clone)]
pub struct CandidateStream {
    importance: Vec<usize>,
    /// Sentence indices eligible for removal, ascending.
    pool: Vec<usize>,
    max_size: usize,
    remaining: usize,
    size: usize,
    level: alloc::vec::IntoIter<Candidate>,
}

impl CandidateStream {
    fn next_level(&mut self) -> bool {
        self.size += 1;
        if self.size > self.max_size {
            return false;
        }
        let mut level = Vec::new();
        for_each_combination(self.pool.len(), self.size, |positions| {
            let indices: Vec<usize> = positions.iter().map(|&p| self.pool[p]).collect();
            let importance = indices.iter().map(|&i| self.importance[i]).sum();
            level.push(Candidate { indices, importance });
        });
        level.sort_by(|a, b| b.importance.cmp(&a.importance).then_with(|| a.indices.cmp(&b.indices)));
        self.level = level.into_iter();
        true
    }
}

impl Iterator for CandidateStream {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        if self.remaining == 0 {
            return None;
        }
        loop {
            if let Some(c) = self.level.next() {
                self.remaining -= 1;
                return Some(c);
            }
            if !self.next_level() {
                return None;
            }
        }
    }
}

/// Visit every `size`-combination of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(n: usize, size: usize, mut visit: impl FnMut(&[usize])) {
    if size == 0 || size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        visit(&idx);
        let mut i = size;
        while i > 0 && idx[i - 1] == n - size + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Ordered stream of removal sets for a document with the given
/// per-sentence importance scores.
pub fn enumerate_candidates(importance: &[usize], caps: DocumentCaps) -> CandidateStream {
    let mut pool: Vec<usize> = (0..importance.len()).collect();
    if pool.len() > caps.max_candidate_sentences {
        pool.sort_by(|&a, &b| importance[b].cmp(&importance[a]).then(a.cmp(&b)));
        pool.truncate(caps.max_candidate_sentences);
        pool.sort_unstable();
    }
    CandidateStream {
        importance: importance.to_vec(),
        max_size: caps.max_removals.min(pool.len()),
        pool,
        remaining: caps.max_evaluations,
        size: 0,
        level: Vec::new().into_iter(),
    }
}

/// Body text with the `removed` sentences dropped, remaining sentences
/// joined by single spaces.
pub fn apply_perturbation(doc: &Document, removed: &[usize]) -> Result<String, Error> {
    let m = doc.sentences.len();
    if let Some(&bad) = removed.iter().find(|&&i| i >= m) {
        return Err(Error::IndexOutOfRange { index: bad, len: m });
    }
    let mut out = String::new();
    for s in doc.sentences.iter().filter(|s| !removed.contains(&s.index)) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&s.text);
    }
    Ok(out)
}

pub fn generate_document_counterfactuals<R: Ranker + ?Sized>(
    ranker: &R,
    corpus: &Corpus,
    request: &DocumentCfRequest,
) -> Result<DocumentCfOutcome, Error> {
    if request.k == 0 || request.n == 0 {
        return Err(Error::InvalidRequest("k and n must be at least 1"));
    }
    request.caps.validate()?;
    let ranking = CorpusRanking::compute(ranker, corpus, &request.query)?;
    generate_with_ranking(ranker, &ranking, request)
}

/// Same as [`generate_document_counterfactuals`] but reuses an existing
/// corpus ranking for `request.query`.
pub fn generate_with_ranking<R: Ranker + ?Sized>(
    ranker: &R,
    ranking: &CorpusRanking<'_>,
    request: &DocumentCfRequest,
) -> Result<DocumentCfOutcome, Error> {
    let corpus = ranking.corpus();
    let pos = corpus
        .position(&request.doc_id)
        .filter(|&p| ranking.rank_of_position(p) <= request.k)
        .ok_or_else(|| Error::DocumentNotInTopK { doc_id: request.doc_id.clone(), k: request.k })?;
    let doc = &corpus.documents()[pos];
    let importance: Vec<usize> = doc
        .sentences
        .iter()
        .map(|s| sentence_importance_with(s, &request.query, request.importance))
        .collect();

    let mut explanations: Vec<SentencePerturbation> = Vec::new();
    let mut evaluations = 0;
    for candidate in enumerate_candidates(&importance, request.caps) {
        if request.prune_supersets
            && explanations
                .iter()
                .any(|e| e.removed.iter().all(|i| candidate.indices.contains(i)))
        {
            continue;
        }
        let text = apply_perturbation(doc, &candidate.indices)?;
        let score = ranker.score_text(&request.query, &doc.id, &text)?;
        evaluations += 1;
        let new_rank = ranking.rank_with_substitute(pos, score);
        if new_rank > request.k {
            explanations.push(SentencePerturbation {
                removed: candidate.indices,
                importance: candidate.importance,
                new_rank,
                valid: true,
            });
            if explanations.len() == request.n {
                break;
            }
        }
    }
    Ok(DocumentCfOutcome { explanations, evaluations })
}
