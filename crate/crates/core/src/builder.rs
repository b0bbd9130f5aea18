//! Build-your-own counterfactuals: re-rank an edited document against the
//! original top k+1 and report how every document moved.

use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{Corpus, Query};
use crate::error::Error;
use crate::ranking::{ranking_order, CorpusRanking, Ranker};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Raised,
    Lowered,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankDelta {
    pub doc_id: String,
    pub old_rank: usize,
    pub new_rank: usize,
    pub direction: Direction,
    /// The document originally ranked k+1.
    pub is_hidden_entrant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuilderResult {
    /// One delta per pool document, in new-rank order.
    pub deltas: Vec<RankDelta>,
    pub edited_doc_id: String,
    /// The edited document fell to the bottom of the pool.
    pub valid: bool,
}

impl BuilderResult {
    pub fn delta(&self, doc_id: &str) -> Option<&RankDelta> {
        self.deltas.iter().find(|d| d.doc_id == doc_id)
    }
}

/// Re-rank the original top `k + 1` with `edited_body` substituted for
/// `edited_doc_id`. Only the edited document is re-scored; the others
/// keep the scores from the original ranking.
pub fn rerank_with_edit<R: Ranker + ?Sized>(
    ranker: &R,
    corpus: &Corpus,
    query: &Query,
    k: usize,
    edited_doc_id: &str,
    edited_body: &str,
) -> Result<BuilderResult, Error> {
    if k == 0 {
        return Err(Error::InvalidRequest("k must be at least 1"));
    }
    let ranking = CorpusRanking::compute(ranker, corpus, query)?;
    rerank_pool(ranker, &ranking, query, k, edited_doc_id, edited_body)
}

pub fn rerank_pool<R: Ranker + ?Sized>(
    ranker: &R,
    ranking: &CorpusRanking<'_>,
    query: &Query,
    k: usize,
    edited_doc_id: &str,
    edited_body: &str,
) -> Result<BuilderResult, Error> {
    let docs = ranking.corpus().documents();
    let pool: Vec<usize> = ranking.order().iter().take(k + 1).copied().collect();
    let edited = pool
        .iter()
        .take(k)
        .position(|&p| docs[p].id == edited_doc_id)
        .ok_or_else(|| Error::DocumentNotInTopK { doc_id: edited_doc_id.into(), k })?;
    let edited_score = ranker.score_text(query, edited_doc_id, edited_body)?;

    let mut scored: Vec<(usize, usize, f64)> = pool
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let score = if i == edited { edited_score } else { ranking.scores()[p] };
            (i + 1, p, score)
        })
        .collect();
    scored.sort_by(|a, b| ranking_order((&docs[a.1].id, a.2), (&docs[b.1].id, b.2)));

    let deltas: Vec<RankDelta> = scored
        .iter()
        .enumerate()
        .map(|(i, &(old_rank, p, _))| {
            let new_rank = i + 1;
            RankDelta {
                doc_id: docs[p].id.clone(),
                old_rank,
                new_rank,
                direction: match new_rank.cmp(&old_rank) {
                    core::cmp::Ordering::Less => Direction::Raised,
                    core::cmp::Ordering::Greater => Direction::Lowered,
                    core::cmp::Ordering::Equal => Direction::Unchanged,
                },
                is_hidden_entrant: old_rank == k + 1,
            }
        })
        .collect();
    let edited_new_rank = deltas
        .iter()
        .find(|d| d.old_rank == edited + 1)
        .map(|d| d.new_rank)
        .unwrap_or(0);
    Ok(BuilderResult {
        valid: edited_new_rank == pool.len(),
        deltas,
        edited_doc_id: edited_doc_id.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::ranking::{Bm25Ranker, InvertedIndex};

    fn corpus(bodies: &[&str]) -> Corpus {
        Corpus::new(
            bodies
                .iter()
                .enumerate()
                .map(|(i, b)| Document::new(alloc::format!("d{}", i + 1), None, *b).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn fixture() -> Corpus {
        corpus(&[
            "covid outbreak covid outbreak",
            "covid outbreak news",
            "covid report today",
            "outbreak of flu",
            "weather",
        ])
    }

    #[test]
    fn identity_edit_is_unchanged_and_invalid() {
        let c = fixture();
        let r = Bm25Ranker::new(InvertedIndex::build(&c).unwrap());
        let q = Query::new("covid outbreak");
        let body = c.get("d2").unwrap().body.clone();
        let res = rerank_with_edit(&r, &c, &q, 3, "d2", &body).unwrap();
        assert_eq!(res.deltas.len(), 4);
        assert!(res.deltas.iter().all(|d| d.direction == Direction::Unchanged));
        assert!(!res.valid);
        assert_eq!(res.deltas.iter().filter(|d| d.is_hidden_entrant).count(), 1);
    }

    #[test]
    fn stripping_query_terms_demotes_to_bottom() {
        let c = fixture();
        let r = Bm25Ranker::new(InvertedIndex::build(&c).unwrap());
        let q = Query::new("covid outbreak");
        let res = rerank_with_edit(&r, &c, &q, 3, "d1", "flu flu news").unwrap();
        let edited = res.delta("d1").unwrap();
        assert_eq!((edited.old_rank, edited.new_rank), (1, 4));
        assert_eq!(edited.direction, Direction::Lowered);
        assert!(res.valid);
        let entrant = res.deltas.iter().find(|d| d.is_hidden_entrant).unwrap();
        assert_eq!(entrant.direction, Direction::Raised);
        let drift: isize = res.deltas.iter().map(|d| d.new_rank as isize - d.old_rank as isize).sum();
        assert_eq!(drift, 0);
    }

    #[test]
    fn empty_edit_is_legal() {
        let c = fixture();
        let r = Bm25Ranker::new(InvertedIndex::build(&c).unwrap());
        let res = rerank_with_edit(&r, &c, &Query::new("covid outbreak"), 3, "d3", "").unwrap();
        assert!(res.valid);
    }

    #[test]
    fn pool_without_hidden_entrant() {
        let c = corpus(&["covid", "covid covid"]);
        let r = Bm25Ranker::new(InvertedIndex::build(&c).unwrap());
        let res = rerank_with_edit(&r, &c, &Query::new("covid"), 2, "d2", "nothing").unwrap();
        assert!(res.deltas.iter().all(|d| !d.is_hidden_entrant));
        assert_eq!(res.delta("d2").unwrap().new_rank, 2);
        assert!(res.valid);
    }

    #[test]
    fn not_in_top_k() {
        let c = fixture();
        let r = Bm25Ranker::new(InvertedIndex::build(&c).unwrap());
        assert!(matches!(
            rerank_with_edit(&r, &c, &Query::new("covid outbreak"), 2, "d5", "x"),
            Err(Error::DocumentNotInTopK { .. })
        ));
    }
}
