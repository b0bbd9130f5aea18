//! Instance-based counterfactuals: real documents ranked below k that look
//! like the relevant instance document.
//!
//! Two variants share the candidate set (corpus ranks k+1..N) and differ in
//! how documents are represented:
//!
//! * [`sampled_counterfactual_instances`] compares sparse BM25 term-weight
//!   vectors over a seeded uniform sample of the candidates.
//! * [`embedding_counterfactual_instances`] asks an [`EmbeddingProvider`]
//!   for a vector per document and scans every candidate.
//!
//! With [`LexicalEmbeddings`] as provider and a sample covering every
//! candidate the two variants return the same list.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{tokenize, Corpus, Query};
use crate::error::{Error, RankError};
use crate::ranking::{bm25_term_weight, cmp_scores, Bm25Params, Bm25Ranker, CorpusRanking, DocText, InvertedIndex, Ranker};

/// Sparse term-weight vector of one document. Zero weights are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentVector {
    pub doc_id: String,
    pub weights: BTreeMap<String, f64>,
}

impl DocumentVector {
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.weights.values().map(|w| w * w).sum())
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            doc_id: self.doc_id.clone(),
            weights: self.weights.iter().map(|(t, w)| (t.clone(), w * factor)).collect(),
        }
    }
}

/// Builds BM25 document vectors from frozen collection statistics.
#[derive(Debug, Clone, Copy)]
pub struct VectorSpace<'a> {
    index: &'a InvertedIndex,
    params: Bm25Params,
}

impl<'a> VectorSpace<'a> {
    pub fn new(index: &'a InvertedIndex, params: Bm25Params) -> Self {
        Self { index, params }
    }

    pub fn from_ranker(ranker: &'a Bm25Ranker) -> Self {
        Self::new(ranker.index(), ranker.params())
    }

    /// Vector of arbitrary text under the indexed collection's statistics.
    pub fn text_vector(&self, doc_id: &str, text: &str) -> DocumentVector {
        let tokens = tokenize(text);
        let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t.as_str()).or_insert(0) += 1;
        }
        let weights = tf
            .into_iter()
            .map(|(term, count)| {
                let w = bm25_term_weight(self.index.stats(), self.params, term, count, tokens.len());
                (String::from(term), w)
            })
            .filter(|(_, w)| *w != 0.0)
            .collect();
        DocumentVector { doc_id: doc_id.into(), weights }
    }
}

pub fn document_vector(
    space: &VectorSpace<'_>,
    corpus: &Corpus,
    doc_id: &str,
) -> Result<DocumentVector, Error> {
    let doc = corpus
        .get(doc_id)
        .ok_or_else(|| RankError::UnknownDocumentId(doc_id.into()))?;
    Ok(space.text_vector(&doc.id, &doc.body))
}

/// Cosine of two sparse vectors; disjoint supports give 0.
pub fn cosine_similarity(u: &DocumentVector, v: &DocumentVector) -> Result<f64, Error> {
    for x in [u, v] {
        if x.is_empty() {
            return Err(Error::ZeroVector(x.doc_id.clone()));
        }
    }
    // Merge-join in term order so cosine(u, v) and cosine(v, u) sum identically.
    let mut dot = 0.0;
    let mut a = u.weights.iter().peekable();
    let mut b = v.weights.iter().peekable();
    while let (Some((ta, wa)), Some((tb, wb))) = (a.peek(), b.peek()) {
        match ta.cmp(tb) {
            core::cmp::Ordering::Less => {
                a.next();
            }
            core::cmp::Ordering::Greater => {
                b.next();
            }
            core::cmp::Ordering::Equal => {
                dot += *wa * *wb;
                a.next();
                b.next();
            }
        }
    }
    Ok((dot / (u.norm() * v.norm())).clamp(-1.0, 1.0))
}

/// Cosine of two dense vectors of equal dimension.
pub fn dense_cosine(u: &[f64], v: &[f64]) -> Result<f64, Error> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), found: v.len() });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = libm::sqrt(u.iter().map(|a| a * a).sum());
    let nv = libm::sqrt(v.iter().map(|b| b * b).sum());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector(String::new()));
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Source of document embeddings for the nearest-neighbour variant.
pub trait EmbeddingProvider {
    type Embedding;

    /// One embedding per document, order-aligned with `docs`.
    fn embed(&self, docs: &[DocText<'_>]) -> Result<Vec<Self::Embedding>, Error>;

    fn similarity(&self, a: &Self::Embedding, b: &Self::Embedding) -> Result<f64, Error>;
}

/// Built-in provider: BM25 document vectors compared by sparse cosine.
#[derive(Debug, Clone, Copy)]
pub struct LexicalEmbeddings<'a>(pub VectorSpace<'a>);

impl EmbeddingProvider for LexicalEmbeddings<'_> {
    type Embedding = DocumentVector;

    fn embed(&self, docs: &[DocText<'_>]) -> Result<Vec<DocumentVector>, Error> {
        Ok(docs.iter().map(|d| self.0.text_vector(d.id, d.text)).collect())
    }

    fn similarity(&self, a: &DocumentVector, b: &DocumentVector) -> Result<f64, Error> {
        cosine_similarity(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceVariant {
    CosineSampled { sample_size: usize, seed: u64 },
    EmbeddingNearest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceCfRequest {
    pub doc_id: String,
    pub query: Query,
    pub k: usize,
    pub n: usize,
    pub variant: InstanceVariant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceExplanation {
    pub doc_id: String,
    pub similarity: f64,
    pub corpus_rank: usize,
}

struct Candidates<'c> {
    ranking: CorpusRanking<'c>,
    instance: usize,
    /// Corpus positions ranked below k, in rank order.
    non_relevant: Vec<usize>,
}

fn candidates<'c, R: Ranker + ?Sized>(
    ranker: &R,
    corpus: &'c Corpus,
    request: &InstanceCfRequest,
) -> Result<Candidates<'c>, Error> {
    if request.k == 0 || request.n == 0 {
        return Err(Error::InvalidRequest("k and n must be at least 1"));
    }
    let ranking = CorpusRanking::compute(ranker, corpus, &request.query)?;
    let instance = corpus
        .position(&request.doc_id)
        .filter(|&p| ranking.rank_of_position(p) <= request.k)
        .ok_or_else(|| Error::DocumentNotInTopK { doc_id: request.doc_id.clone(), k: request.k })?;
    let non_relevant: Vec<usize> = ranking.order().iter().skip(request.k).copied().collect();
    if non_relevant.is_empty() {
        return Err(Error::NoNonRelevantDocuments);
    }
    Ok(Candidates { ranking, instance, non_relevant })
}

fn best_n(
    corpus: &Corpus,
    ranking: &CorpusRanking<'_>,
    scored: Vec<(usize, f64)>,
    n: usize,
) -> Vec<InstanceExplanation> {
    let docs = corpus.documents();
    let mut scored = scored;
    scored.sort_by(|a, b| {
        cmp_scores(b.1, a.1).then_with(|| docs[a.0].id.cmp(&docs[b.0].id))
    });
    scored
        .into_iter()
        .take(n)
        .map(|(pos, similarity)| InstanceExplanation {
            doc_id: docs[pos].id.clone(),
            similarity,
            corpus_rank: ranking.rank_of_position(pos),
        })
        .collect()
}

/// Cosine over BM25 vectors for a uniform sample of `min(s, N - k)`
/// non-relevant documents; the `n` most similar samples, best first.
///
/// Empty documents have no vector and are skipped.
pub fn sampled_counterfactual_instances<R: Ranker + ?Sized>(
    ranker: &R,
    corpus: &Corpus,
    space: &VectorSpace<'_>,
    request: &InstanceCfRequest,
) -> Result<Vec<InstanceExplanation>, Error> {
    let InstanceVariant::CosineSampled { sample_size, seed } = request.variant else {
        return Err(Error::InvalidRequest("variant must be cosine_sampled"));
    };
    if sample_size < request.n {
        return Err(Error::InvalidRequest("sample size must be at least n"));
    }
    let c = candidates(ranker, corpus, request)?;
    let docs = corpus.documents();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amount = sample_size.min(c.non_relevant.len());
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, c.non_relevant.len(), amount)
        .into_iter()
        .map(|i| c.non_relevant[i])
        .collect();
    picked.sort_unstable();

    let target = space.text_vector(&docs[c.instance].id, &docs[c.instance].body);
    let mut scored = Vec::with_capacity(picked.len());
    for pos in picked {
        let v = space.text_vector(&docs[pos].id, &docs[pos].body);
        if v.is_empty() {
            continue;
        }
        scored.push((pos, cosine_similarity(&target, &v)?));
    }
    Ok(best_n(corpus, &c.ranking, scored, request.n))
}

/// The `n` non-relevant documents whose embeddings are most similar to the
/// instance's, best first.
pub fn embedding_counterfactual_instances<R, P>(
    ranker: &R,
    corpus: &Corpus,
    provider: &P,
    request: &InstanceCfRequest,
) -> Result<Vec<InstanceExplanation>, Error>
where
    R: Ranker + ?Sized,
    P: EmbeddingProvider + ?Sized,
{
    let c = candidates(ranker, corpus, request)?;
    let docs: Vec<DocText<'_>> = corpus
        .iter()
        .map(|d| DocText { id: &d.id, text: &d.body })
        .collect();
    let embeddings = provider.embed(&docs)?;
    if embeddings.len() != docs.len() {
        return Err(Error::EmbeddingProviderUnreachable(alloc::format!(
            "expected {} embeddings, got {}",
            docs.len(),
            embeddings.len()
        )));
    }
    let target = &embeddings[c.instance];
    let mut scored = Vec::with_capacity(c.non_relevant.len());
    for &pos in &c.non_relevant {
        match provider.similarity(target, &embeddings[pos]) {
            Ok(sim) => scored.push((pos, sim)),
            Err(Error::ZeroVector(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(best_n(corpus, &c.ranking, scored, request.n))
}
