use proptest::prelude::*;
use rankcf_core::cf_instance::{cosine_similarity, VectorSpace};
use rankcf_core::corpus::{split_sentences, Document};
use rankcf_core::ranking::{rank_of_substitute, rank_top_k};
use rankcf_core::{tokenize, Bm25Ranker, Corpus, InvertedIndex, Query};

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "covid", "outbreak", "5G", "Mask", "vaccine", "flu", "the", "a", "City", "dr", "x",
    ])
    .prop_map(String::from)
}

fn sentence() -> impl Strategy<Value = String> {
    (prop::collection::vec(word(), 1..8), prop::sample::select(vec![".", "!", "?", ""]))
        .prop_map(|(w, end)| format!("{}{end}", w.join(" ")))
}

fn body() -> impl Strategy<Value = String> {
    prop::collection::vec(sentence(), 1..5).prop_map(|s| s.join(" "))
}

fn corpus_of(bodies: &[String]) -> Corpus {
    Corpus::new(
        bodies
            .iter()
            .enumerate()
            .map(|(i, b)| Document::new(format!("d{i:02}"), None, b.clone()).unwrap())
            .collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn tokens_are_lowercase_and_nonempty(text in "\\PC{0,60}") {
        for t in tokenize(&text) {
            prop_assert!(!t.is_empty());
            // a few symbols (e.g. mathematical script capitals) have no lowercase form
            prop_assert_eq!(t.to_lowercase(), t);
        }
    }

    #[test]
    fn sentences_partition_tokens(text in body()) {
        let sentences = split_sentences(&text);
        let joined: Vec<String> = sentences.iter().flat_map(|s| s.tokens.clone()).collect();
        prop_assert_eq!(joined, tokenize(&text));
        for s in &sentences {
            let again = split_sentences(&s.text);
            prop_assert_eq!(again.len(), 1);
            prop_assert_eq!(&again[0].text, &s.text);
        }
    }

    #[test]
    fn top_k_is_a_rank_permutation(bodies in prop::collection::vec(body(), 1..8), q in word(), k in 1usize..10) {
        let c = corpus_of(&bodies);
        let r = Bm25Ranker::new(InvertedIndex::build(&c).unwrap());
        let list = rank_top_k(&r, &c, &Query::new(q), k).unwrap();
        let ranks: Vec<usize> = list.entries.iter().map(|e| e.rank).collect();
        prop_assert_eq!(ranks, (1..=k.min(c.len())).collect::<Vec<_>>());
    }

    #[test]
    fn identity_substitute_keeps_rank(bodies in prop::collection::vec(body(), 1..8), q in word(), pick in 0usize..8) {
        let c = corpus_of(&bodies);
        let r = Bm25Ranker::new(InvertedIndex::build(&c).unwrap());
        let query = Query::new(q);
        let doc = &c.documents()[pick % c.len()];
        let full = rank_top_k(&r, &c, &query, c.len()).unwrap();
        let got = rank_of_substitute(&r, &c, &query, &doc.id, &doc.body).unwrap();
        prop_assert_eq!(Some(got), full.rank_of(&doc.id));
    }

    #[test]
    fn cosine_is_symmetric(bodies in prop::collection::vec(body(), 2..6)) {
        let c = corpus_of(&bodies);
        let r = Bm25Ranker::new(InvertedIndex::build(&c).unwrap());
        let space = VectorSpace::from_ranker(&r);
        let vs: Vec<_> = c.iter().map(|d| space.text_vector(&d.id, &d.body)).collect();
        for a in vs.iter().filter(|v| !v.is_empty()) {
            prop_assert!((cosine_similarity(a, a).unwrap() - 1.0).abs() < 1e-12);
            for b in vs.iter().filter(|v| !v.is_empty()) {
                prop_assert_eq!(cosine_similarity(a, b).unwrap(), cosine_similarity(b, a).unwrap());
            }
        }
    }
}
