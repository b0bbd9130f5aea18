//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed;
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankcf::remote::ExternalRanker;
use rankcf_core::builder::{rerank_with_edit, Direction};
use rankcf_core::cf_document::{
    apply_perturbation, generate_document_counterfactuals, DocumentCaps, DocumentCfRequest,
};
use rankcf_core::cf_instance::{
    cosine_similarity, embedding_counterfactual_instances, sampled_counterfactual_instances,
    DocumentVector, InstanceCfRequest, InstanceVariant, LexicalEmbeddings, VectorSpace,
};
use rankcf_core::cf_query::{candidate_terms, generate_query_counterfactuals, QueryCaps, QueryCfRequest};
use rankcf_core::corpus::Document;
use rankcf_core::ranking::{rank_of_substitute, rank_top_k};
use rankcf_core::stopwords::Stopwords;
use rankcf_core::topics::{fit_lda_tokens, prepare, LdaConfig, LdaSampler};
use rankcf_core::{tokenize, Bm25Ranker, Corpus, Error, InvertedIndex, Query};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const TOPICAL: &[&str] = &[
    "covid", "outbreak", "vaccine", "flu", "mask", "school", "city", "towers", "5g", "microchip",
    "hospital", "travel", "test", "virus", "rumour", "network",
];
const FILLER: &[&str] = &["the", "a", "of", "in", "and", "was"];

struct Fixture {
    corpus: Corpus,
    query: Query,
    k: usize,
    doc_id: String,
}

fn random_body(rng: &mut ChaCha8Rng, max_sentences: usize) -> String {
    let m = rng.random_range(1..=max_sentences);
    (0..m)
        .map(|_| {
            let len = rng.random_range(2..=6);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.random_bool(0.25) {
                        *FILLER.choose(rng).unwrap()
                    } else {
                        *TOPICAL[..10].choose(rng).unwrap()
                    }
                })
                .collect();
            format!("{}.", words.join(" "))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_corpus(rng: &mut ChaCha8Rng, max_docs: usize, max_sentences: usize) -> Corpus {
    let n = rng.random_range(4..=max_docs);
    Corpus::new(
        (0..n)
            .map(|i| Document::new(format!("r{i:02}"), None, random_body(rng, max_sentences)).unwrap())
            .collect(),
    )
    .unwrap()
}

fn random_query(rng: &mut ChaCha8Rng) -> Query {
    let count = rng.random_range(1..=2);
    let terms: Vec<&str> = TOPICAL[..6].choose_multiple(rng, count).copied().collect();
    Query::new(terms.join(" "))
}

/// Random fixtures: ≤10 docs, ≤6 sentences each, k ∈ {2,3}, instance in the top k.
fn fixtures(seed: u64, count: usize) -> Vec<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let corpus = random_corpus(&mut rng, 10, 6);
        let query = random_query(&mut rng);
        let k = *[2usize, 3].choose(&mut rng).unwrap();
        let ranker = bm25(&corpus);
        let top = rank_top_k(&ranker, &corpus, &query, k).unwrap();
        let pick = rng.random_range(0..top.len());
        let doc_id = top.entries[pick].doc_id.clone();
        out.push(Fixture { corpus, query, k, doc_id });
    }
    out
}

fn bm25(corpus: &Corpus) -> Bm25Ranker {
    Bm25Ranker::new(InvertedIndex::build(corpus).unwrap())
}

/// Rank of `id` after a full re-sort with `text` substituted for its body.
fn resort_rank(r: &Bm25Ranker, c: &Corpus, q: &Query, id: &str, text: &str) -> usize {
    let mut scored: Vec<(f64, &str)> = c
        .iter()
        .map(|d| (r.score(q, if d.id == id { text } else { &d.body }), d.id.as_str()))
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
    scored.iter().position(|e| e.1 == id).unwrap() + 1
}

fn document_minimality() -> Outcome {
    let fx = fixtures(11, 60);
    let mut with_cf = 0;
    for (i, f) in fx.iter().enumerate() {
        let r = bm25(&f.corpus);
        let doc = f.corpus.get(&f.doc_id).unwrap();
        let m = doc.sentences.len();
        let mut minimum = None;
        for mask in 1u32..(1 << m) {
            let removed: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
            let text = apply_perturbation(doc, &removed).unwrap();
            if resort_rank(&r, &f.corpus, &f.query, &f.doc_id, &text) > f.k {
                minimum = Some(minimum.map_or(removed.len(), |v: usize| v.min(removed.len())));
            }
        }
        let mut req = DocumentCfRequest::new(&f.doc_id, f.query.clone(), f.k, 3);
        req.caps = DocumentCaps { max_candidate_sentences: 20, max_removals: 6, max_evaluations: 10_000 };
        let out = generate_document_counterfactuals(&r, &f.corpus, &req).map_err(|e| e.to_string())?;
        for e in &out.explanations {
            let text = apply_perturbation(doc, &e.removed).unwrap();
            let rank = resort_rank(&r, &f.corpus, &f.query, &f.doc_id, &text);
            ensure!(e.valid && rank > f.k && rank == e.new_rank, "fixture {i}: {e:?} re-ranks to {rank}");
        }
        let first = out.explanations.first().map(|e| e.size());
        ensure!(first == minimum, "fixture {i}: first size {first:?}, exhaustive minimum {minimum:?}");
        with_cf += usize::from(minimum.is_some());
    }
    Ok(format!("{} fixtures, {with_cf} with a counterfactual", fx.len()))
}

fn query_minimality() -> Outcome {
    let fx = fixtures(11, 60);
    let stop = Stopwords::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut checked, mut empty_pool) = (0, 0);
    for (i, f) in fx.iter().enumerate() {
        let r = bm25(&f.corpus);
        let threshold = rng.random_range(1..=f.k);
        let ranking = rank_top_k(&r, &f.corpus, &f.query, f.k).unwrap();
        let ranked: Vec<&Document> = ranking.entries.iter().map(|e| f.corpus.get(&e.doc_id).unwrap()).collect();
        let doc = f.corpus.get(&f.doc_id).unwrap();
        let pool = candidate_terms(doc, &f.query, &ranked, &stop, 12);
        let mut req = QueryCfRequest::new(&f.doc_id, f.query.clone(), f.k, 2, threshold);
        req.caps = QueryCaps { max_candidate_terms: 12, max_append: 3, max_evaluations: 10_000 };
        let out = generate_query_counterfactuals(&r, &f.corpus, &req, &stop);
        if pool.is_empty() {
            ensure!(matches!(out, Err(Error::EmptyCandidatePool)), "fixture {i}: expected empty pool");
            empty_pool += 1;
            continue;
        }
        let out = out.map_err(|e| e.to_string())?;
        let rank_with = |terms: &[String]| {
            rank_top_k(&r, &f.corpus, &f.query.augmented(terms), f.corpus.len()).unwrap().rank_of(&f.doc_id).unwrap()
        };
        let mut minimum = None;
        'search: for size in 1..=3.min(pool.len()) {
            let mut idx: Vec<usize> = (0..size).collect();
            loop {
                let terms: Vec<String> = idx.iter().map(|&p| pool[p].term.clone()).collect();
                if rank_with(&terms) <= threshold {
                    minimum = Some(size);
                    break 'search;
                }
                // next combination in lexicographic order
                let mut j = size;
                while j > 0 && idx[j - 1] == pool.len() - size + j - 1 {
                    j -= 1;
                }
                if j == 0 {
                    break;
                }
                idx[j - 1] += 1;
                for l in j..size {
                    idx[l] = idx[l - 1] + 1;
                }
            }
        }
        for e in &out.explanations {
            let rank = rank_with(&e.appended);
            ensure!(e.valid && rank <= threshold && rank == e.new_rank, "fixture {i}: {e:?} re-ranks to {rank}");
        }
        let first = out.explanations.first().map(|e| e.appended.len());
        ensure!(first == minimum, "fixture {i}: first size {first:?}, exhaustive minimum {minimum:?}");
        checked += 1;
    }
    ensure!(checked >= 50, "only {checked} fixtures had a candidate pool");
    Ok(format!("{checked} fixtures ({empty_pool} with an empty pool skipped)"))
}

fn bm25_hand_check() -> Outcome {
    let bodies = ["the cat sat on the mat", "the dog sat", "cat and dog and cat"];
    let c = Corpus::new(bodies.iter().enumerate().map(|(i, b)| Document::new(format!("h{i}"), None, *b).unwrap()).collect())
        .unwrap();
    let r = bm25(&c);
    // N=3, lengths 6/3/5, avg 14/3; df: cat 2, sat 2, dog 2, mat 1
    let avg = 14.0 / 3.0;
    let idf = |df: f64| (1.0 + (3.0 - df + 0.5) / (df + 0.5)).ln();
    let w = |df: f64, tf: f64, len: f64| idf(df) * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * len / avg));
    let q = Query::new("cat mat");
    let expected = [w(2.0, 1.0, 6.0) + w(1.0, 1.0, 6.0), 0.0, w(2.0, 2.0, 5.0)];
    let mut worst: f64 = 0.0;
    for (b, want) in bodies.iter().zip(expected) {
        worst = worst.max((r.score(&q, b) - want).abs());
    }
    ensure!(worst <= 1e-9, "max deviation {worst:e}");
    Ok(format!("max deviation {worst:.1e}"))
}

fn ranking_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..100 {
        let corpus = random_corpus(&mut rng, 12, 4);
        let query = random_query(&mut rng);
        let k = rng.random_range(1..=15);
        let r = bm25(&corpus);
        let list = rank_top_k(&r, &corpus, &query, k).unwrap();
        let ranks: Vec<usize> = list.entries.iter().map(|e| e.rank).collect();
        ensure!(ranks == (1..=k.min(corpus.len())).collect::<Vec<_>>(), "case {case}: ranks {ranks:?}");
        let ids: BTreeSet<&str> = list.entries.iter().map(|e| e.doc_id.as_str()).collect();
        ensure!(ids.len() == list.len(), "case {case}: duplicate ids");
        let full = rank_top_k(&r, &corpus, &query, corpus.len()).unwrap();
        for d in corpus.iter() {
            let got = rank_of_substitute(&r, &corpus, &query, &d.id, &d.body).unwrap();
            ensure!(Some(got) == full.rank_of(&d.id), "case {case}: {} substitute rank {got}", d.id);
        }
    }
    Ok("100 cases".into())
}

fn instance_equivalence() -> Outcome {
    let mut compared = 0;
    let mut check = |c: &Corpus, q: &Query, k: usize, id: &str, n: usize| -> Result<(), String> {
        let r = bm25(c);
        let space = VectorSpace::from_ranker(&r);
        let exhaustive = c.len() - k.min(c.len());
        let base = InstanceCfRequest { doc_id: id.into(), query: q.clone(), k, n, variant: InstanceVariant::EmbeddingNearest };
        let nearest = embedding_counterfactual_instances(&r, c, &LexicalEmbeddings(space), &base);
        let sampled_req = InstanceCfRequest {
            variant: InstanceVariant::CosineSampled { sample_size: exhaustive.max(n), seed: 3 },
            ..base
        };
        let sampled = sampled_counterfactual_instances(&r, c, &space, &sampled_req);
        ensure!(nearest == sampled, "{id}: {nearest:?} != {sampled:?}");
        if let Ok(list) = nearest {
            ensure!(list.iter().all(|e| e.corpus_rank > k), "{id}: corpus_rank <= k");
            compared += 1;
        }
        Ok(())
    };
    let svc = common::service();
    let covid = &svc.handle("covid").unwrap().corpus;
    let q = Query::new("covid outbreak");
    for id in ["d01", "d08", "d03"] {
        check(covid, &q, 3, id, 4)?;
    }
    for f in fixtures(31, 40) {
        check(&f.corpus, &f.query, f.k, &f.doc_id, 3)?;
    }
    Ok(format!("{compared} element-wise comparisons"))
}

fn cosine_properties() -> Outcome {
    let svc = common::service();
    let h = svc.handle("covid").unwrap();
    let space = VectorSpace::from_ranker(&h.bm25);
    let vs: Vec<DocumentVector> = h.corpus.iter().map(|d| space.text_vector(&d.id, &d.body)).collect();
    let (mut self_dev, mut sym_dev): (f64, f64) = (0.0, 0.0);
    for a in &vs {
        self_dev = self_dev.max((cosine_similarity(a, a).unwrap() - 1.0).abs());
        for b in &vs {
            sym_dev = sym_dev.max((cosine_similarity(a, b).unwrap() - cosine_similarity(b, a).unwrap()).abs());
        }
    }
    ensure!(self_dev <= 1e-12, "self-similarity deviation {self_dev:e}");
    ensure!(sym_dev <= 1e-12, "symmetry deviation {sym_dev:e}");
    fn order<'a>(vs: &'a [DocumentVector], target: &DocumentVector) -> Vec<(f64, &'a str)> {
        let mut s: Vec<(f64, &str)> = vs.iter().map(|v| (cosine_similarity(target, v).unwrap(), v.doc_id.as_str())).collect();
        s.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        s
    }
    for factor in [0.5, 2.0, 3.7, 1e-3, 250.0] {
        let scaled: Vec<DocumentVector> = vs.iter().map(|v| v.scaled(factor)).collect();
        for (t, st) in vs.iter().zip(&scaled) {
            let before = order(&vs, t);
            let after = order(&scaled, st);
            // orders agree up to swaps between values equal within 1e-12
            for (x, y) in before.iter().zip(&after) {
                if x.1 != y.1 {
                    let bx = before.iter().find(|e| e.1 == y.1).unwrap().0;
                    ensure!((x.0 - bx).abs() <= 1e-12, "factor {factor}: order changed for {}", t.doc_id);
                }
            }
        }
    }
    Ok(format!("self {self_dev:.1e}, symmetry {sym_dev:.1e}"))
}

fn lda() -> Outcome {
    let started = Instant::now();
    let (left, right): (Vec<String>, Vec<String>) =
        ((0..8).map(|i| format!("alpha{i}")).collect(), (0..8).map(|i| format!("omega{i}")).collect());
    let synthetic = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let labels: Vec<usize> = (0..20).map(|d| d % 2).collect();
        let docs: Vec<Vec<String>> = labels
            .iter()
            .map(|&l| {
                let vocab = if l == 0 { &left } else { &right };
                (0..50).map(|_| vocab.choose(&mut rng).unwrap().clone()).collect()
            })
            .collect();
        (docs, labels)
    };

    // normalization and conservation after every sweep
    let (docs, _) = synthetic(0);
    let config = LdaConfig { topics: 2, iterations: 50, seed: 9, ..LdaConfig::default() };
    let (vocab, words) = prepare(docs.iter().map(Vec::as_slice), &config.stopwords, config.min_count);
    let mut sampler = LdaSampler::new(vocab, words, &config).map_err(|e| e.to_string())?;
    let tokens = sampler.token_count();
    for sweep in 0..config.iterations {
        sampler.sweep();
        ensure!(sampler.count_totals() == [tokens; 3], "sweep {sweep}: counts {:?}", sampler.count_totals());
        let model = sampler.clone().into_model();
        for row in model.phi.iter().chain(&model.theta) {
            let s: f64 = row.iter().sum();
            ensure!((s - 1.0).abs() <= 1e-9, "sweep {sweep}: row sums to {s}");
        }
    }

    let a = fit_lda_tokens(&docs, &config).map_err(|e| e.to_string())?;
    let b = fit_lda_tokens(&docs, &config).map_err(|e| e.to_string())?;
    let bits = |m: &rankcf_core::topics::TopicModel| {
        m.phi.iter().chain(&m.theta).flatten().map(|x| x.to_bits()).collect::<Vec<_>>()
    };
    ensure!(bits(&a) == bits(&b), "seeded runs differ");

    let mut pure = Vec::new();
    for seed in 0..5 {
        let (docs, labels) = synthetic(seed);
        let config = LdaConfig { topics: 2, seed, ..LdaConfig::default() };
        let model = fit_lda_tokens(&docs, &config).map_err(|e| e.to_string())?;
        let hits = (0..docs.len()).filter(|&d| model.dominant_topic(d) == Some(labels[d])).count();
        let purity = hits.max(docs.len() - hits) as f64 / docs.len() as f64;
        pure.push(purity);
    }
    let passing = pure.iter().filter(|&&p| p >= 0.9).count();
    let elapsed = started.elapsed();
    ensure!(passing >= 4, "purity {pure:?}");
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("purity {pure:?}, {:.1}s", elapsed.as_secs_f64()))
}

fn builder() -> Outcome {
    let mut checked = 0;
    for f in fixtures(41, 60) {
        let r = bm25(&f.corpus);
        let doc = f.corpus.get(&f.doc_id).unwrap();
        let same = rerank_with_edit(&r, &f.corpus, &f.query, f.k, &f.doc_id, &doc.body).map_err(|e| e.to_string())?;
        ensure!(!same.valid, "{}: identity edit marked valid", f.doc_id);
        ensure!(same.deltas.iter().all(|d| d.direction == Direction::Unchanged), "{}: identity moved docs", f.doc_id);

        let stripped: Vec<String> = tokenize(&doc.body).into_iter().filter(|t| !f.query.contains(t)).collect();
        let edited = if stripped.is_empty() { "nothing".to_string() } else { stripped.join(" ") };
        let result = rerank_with_edit(&r, &f.corpus, &f.query, f.k, &f.doc_id, &edited).map_err(|e| e.to_string())?;
        let sum: i64 = result.deltas.iter().map(|d| d.new_rank as i64 - d.old_rank as i64).sum();
        ensure!(sum == 0, "{}: rank deltas sum to {sum}", f.doc_id);

        let pool = rank_top_k(&r, &f.corpus, &f.query, f.k + 1).unwrap();
        let others_match = pool.entries.iter().filter(|e| e.doc_id != f.doc_id).all(|e| e.score > 0.0);
        if others_match && pool.len() == f.k + 1 {
            let d = result.delta(&f.doc_id).unwrap();
            ensure!(d.new_rank == f.k + 1 && result.valid, "{}: stripped edit ranks {}", f.doc_id, d.new_rank);
            checked += 1;
        }
    }
    ensure!(checked >= 10, "only {checked} query-term-free edits were checkable");
    Ok(format!("60 identity edits, {checked} query-term-free edits"))
}

fn protocol_round_trip() -> Outcome {
    let addr = common::server();
    let svc = common::service();
    let mut lists = 0;
    for (name, queries) in [("covid", &["covid outbreak", "5g towers", "flu", "vaccine microchip"][..]), ("five", &["cat mat", "dog"][..])] {
        let h = svc.handle(name).unwrap();
        let remote = ExternalRanker::new(format!("{}/rankers/{name}", common::base_url(addr)));
        for q in queries {
            let q = Query::new(*q);
            for k in [1, 3, h.corpus.len()] {
                let direct = rank_top_k(&h.bm25, &h.corpus, &q, k).map_err(|e| e.to_string())?;
                let via = rank_top_k(&remote, &h.corpus, &q, k).map_err(|e| e.to_string())?;
                ensure!(direct == via, "{name} / {:?} / k={k} differs: {direct:?} vs {via:?}", q.raw);
                lists += 1;
            }
        }
    }
    Ok(format!("{lists} ranked lists identical"))
}

fn main() {
    let criteria: &[Criterion] = &[
        ("document counterfactual minimality", document_minimality, Some(Duration::from_secs(60))),
        ("query counterfactual minimality", query_minimality, Some(Duration::from_secs(60))),
        ("bm25 hand check", bm25_hand_check, None),
        ("ranking invariants", ranking_invariants, None),
        ("instance variant equivalence", instance_equivalence, None),
        ("cosine properties", cosine_properties, None),
        ("lda", lda, Some(Duration::from_secs(30))),
        ("builder", builder, None),
        ("protocol round trip", protocol_round_trip, None),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let started = Instant::now();
        let result = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let elapsed = started.elapsed();
        let result = match (result, budget) {
            (Ok(_), Some(b)) if elapsed > *b => Err(format!("took {elapsed:?}, budget {b:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.2}s]", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{:.2}s]", elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
