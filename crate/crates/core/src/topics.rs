//! LDA topic model over a ranked document set, fitted by collapsed Gibbs
//! sampling.
//!
//! The sampler is single-threaded and driven by a seeded ChaCha8 stream, so
//! a given `(documents, config)` pair always produces the same model.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::error::Error;
use crate::ranking::cmp_scores;
use crate::stopwords::Stopwords;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub topics: usize,
    /// Document-topic prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Terms occurring fewer times than this across all documents are dropped.
    pub min_count: usize,
    pub stopwords: Stopwords,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            topics: 5,
            alpha: None,
            beta: 0.01,
            iterations: 500,
            seed: 0,
            min_count: 2,
            stopwords: Stopwords::default(),
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    fn validate(&self) -> Result<(), Error> {
        if self.topics == 0 {
            return Err(Error::InvalidHyperparameter("topic count must be at least 1"));
        }
        let alpha = self.alpha();
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidHyperparameter("alpha must be positive"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidHyperparameter("beta must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidHyperparameter("iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub vocab: Vec<String>,
    /// `phi[t][w]`: probability of vocabulary term `w` under topic `t`.
    pub phi: Vec<Vec<f64>>,
    /// `theta[d][t]`: weight of topic `t` in document `d`.
    pub theta: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
}

impl TopicModel {
    pub fn topic_count(&self) -> usize {
        self.phi.len()
    }

    /// The `m` most probable terms of `topic`, ties by term.
    pub fn top_terms(&self, topic: usize, m: usize) -> Result<Vec<(String, f64)>, Error> {
        let row = self
            .phi
            .get(topic)
            .ok_or(Error::TopicIndexOutOfRange { index: topic, topics: self.phi.len() })?;
        let mut terms: Vec<(String, f64)> =
            self.vocab.iter().cloned().zip(row.iter().copied()).collect();
        terms.sort_by(|a, b| cmp_scores(b.1, a.1).then_with(|| a.0.cmp(&b.0)));
        terms.truncate(m);
        Ok(terms)
    }

    /// Index of the heaviest topic in document `d`, lowest index on ties.
    pub fn dominant_topic(&self, d: usize) -> Option<usize> {
        let row = self.theta.get(d)?;
        let mut best = 0;
        for (t, &w) in row.iter().enumerate() {
            if w > row[best] {
                best = t;
            }
        }
        Some(best)
    }
}

/// Vocabulary (sorted) and per-document word ids after stopword removal
/// and the `min_count` filter.
pub fn prepare<'a, I, S>(docs: I, stopwords: &Stopwords, min_count: usize) -> (Vec<String>, Vec<Vec<usize>>)
where
    I: IntoIterator<Item = &'a [S]>,
    S: AsRef<str> + 'a,
{
    let docs: Vec<Vec<&str>> = docs
        .into_iter()
        .map(|d| d.iter().map(AsRef::as_ref).filter(|t| !stopwords.contains(t)).collect())
        .collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in docs.iter().flatten() {
        *counts.entry(*t).or_insert(0) += 1;
    }
    let vocab: Vec<String> = counts
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(t, _)| String::from(*t))
        .collect();
    let ids: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let words = docs
        .iter()
        .map(|d| d.iter().filter_map(|t| ids.get(t).copied()).collect())
        .collect();
    (vocab, words)
}

/// Collapsed Gibbs sampler state.
#[derive(Debug, Clone)]
pub struct LdaSampler {
    vocab: Vec<String>,
    words: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u32>,
    alpha: f64,
    beta: f64,
    seed: u64,
    sweeps: usize,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl LdaSampler {
    /// Random initial assignments for `words` (ids into `vocab`).
    pub fn new(vocab: Vec<String>, words: Vec<Vec<usize>>, config: &LdaConfig) -> Result<Self, Error> {
        config.validate()?;
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let topics = config.topics;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut doc_topic = vec![vec![0u32; topics]; words.len()];
        let mut topic_word = vec![vec![0u32; vocab.len()]; topics];
        let mut topic_total = vec![0u32; topics];
        let mut assignments = Vec::with_capacity(words.len());
        for (d, doc) in words.iter().enumerate() {
            let mut z = Vec::with_capacity(doc.len());
            for &w in doc {
                let t = rng.random_range(0..topics);
                doc_topic[d][t] += 1;
                topic_word[t][w] += 1;
                topic_total[t] += 1;
                z.push(t);
            }
            assignments.push(z);
        }
        Ok(Self {
            vocab,
            words,
            assignments,
            doc_topic,
            topic_word,
            topic_total,
            alpha: config.alpha(),
            beta: config.beta,
            seed: config.seed,
            sweeps: 0,
            rng,
            weights: vec![0.0; topics],
        })
    }

    /// Resample every token's topic once.
    pub fn sweep(&mut self) {
        let vbeta = self.vocab.len() as f64 * self.beta;
        for d in 0..self.words.len() {
            for i in 0..self.words[d].len() {
                let w = self.words[d][i];
                let old = self.assignments[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..self.weights.len() {
                    let p = (self.doc_topic[d][t] as f64 + self.alpha)
                        * (self.topic_word[t][w] as f64 + self.beta)
                        / (self.topic_total[t] as f64 + vbeta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self
                    .weights
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(self.weights.len() - 1);

                self.assignments[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_total[new] += 1;
            }
        }
        self.sweeps += 1;
    }

    pub fn token_count(&self) -> usize {
        self.words.iter().map(Vec::len).sum()
    }

    /// Totals of the three count tables; each equals [`Self::token_count`].
    pub fn count_totals(&self) -> [usize; 3] {
        let sum = |rows: &[Vec<u32>]| rows.iter().flatten().map(|&c| c as usize).sum::<usize>();
        [
            sum(&self.doc_topic),
            sum(&self.topic_word),
            self.topic_total.iter().map(|&c| c as usize).sum(),
        ]
    }

    pub fn into_model(self) -> TopicModel {
        let topics = self.topic_total.len();
        let vbeta = self.vocab.len() as f64 * self.beta;
        let talpha = topics as f64 * self.alpha;
        let phi = self
            .topic_word
            .iter()
            .zip(&self.topic_total)
            .map(|(row, &total)| {
                row.iter().map(|&c| (c as f64 + self.beta) / (total as f64 + vbeta)).collect()
            })
            .collect();
        let theta = self
            .doc_topic
            .iter()
            .zip(&self.words)
            .map(|(row, doc)| {
                row.iter()
                    .map(|&c| (c as f64 + self.alpha) / (doc.len() as f64 + talpha))
                    .collect()
            })
            .collect();
        TopicModel {
            vocab: self.vocab,
            phi,
            theta,
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
            iterations: self.sweeps,
        }
    }
}

/// Fit a topic model to pre-tokenized documents.
pub fn fit_lda_tokens<S: AsRef<str>>(docs: &[Vec<S>], config: &LdaConfig) -> Result<TopicModel, Error> {
    config.validate()?;
    let (vocab, words) = prepare(docs.iter().map(Vec::as_slice), &config.stopwords, config.min_count);
    let mut sampler = LdaSampler::new(vocab, words, config)?;
    for _ in 0..config.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_model())
}

/// Fit a topic model to `docs` (typically the current top k).
pub fn fit_lda(docs: &[&Document], config: &LdaConfig) -> Result<TopicModel, Error> {
    let tokens: Vec<Vec<&str>> = docs.iter().map(|d| d.tokens().collect()).collect();
    fit_lda_tokens(&tokens, config)
}
