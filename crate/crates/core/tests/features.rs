use std::collections::{BTreeMap, HashSet};

use hatelab_core::features::*;
use proptest::prelude::*;

fn toks(s: &[&str]) -> Vec<String> {
    s.iter().map(|t| t.to_string()).collect()
}

fn docs() -> impl Strategy<Value = Vec<Vec<String>>> {
    let tok = prop::sample::select(vec!["a", "b", "c", "d", "ee", "ff"]).prop_map(String::from);
    prop::collection::vec(prop::collection::vec(tok, 0..8), 1..8)
}

/// Unigram tf-idf computed densely from the formula.
fn oracle_unigram(corpus: &[Vec<String>], doc: &[String]) -> BTreeMap<String, f64> {
    let n = corpus.len() as f64;
    let mut out = BTreeMap::new();
    for t in doc {
        let df = corpus.iter().filter(|d| d.contains(t)).count() as f64;
        if df == 0.0 {
            continue;
        }
        *out.entry(t.clone()).or_insert(0.0) += ((1.0 + n) / (1.0 + df)).ln() + 1.0;
    }
    let norm = out.values().map(|w| w * w).sum::<f64>().sqrt();
    out.values_mut().for_each(|w| *w /= norm);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn vectors_are_well_formed(corpus in docs(), lo in 1usize..3, span in 0usize..2) {
        let cfg = FeatureConfig::word(lo, lo + span, 1);
        let Ok(vocab) = build_vocab(corpus.iter().map(Vec::as_slice), &cfg) else { return Ok(()) };
        prop_assert_eq!(vocab.df.len(), vocab.len());
        for (i, t) in vocab.terms.iter().enumerate() {
            prop_assert_eq!(vocab.index_of(t), Some(i as u32));
        }
        for d in &corpus {
            let v = tfidf_vectorize(d, &vocab);
            prop_assert!(v.indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(v.values.iter().all(|x| x.is_finite()));
            prop_assert!(v.nnz() == 0 || (v.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unigram_weights_match_formula(corpus in docs()) {
        let Ok(vocab) = build_vocab(corpus.iter().map(Vec::as_slice), &FeatureConfig::word(1, 1, 1)) else {
            return Ok(());
        };
        for d in &corpus {
            let v = tfidf_vectorize(d, &vocab);
            let want = oracle_unigram(&corpus, d);
            prop_assert_eq!(v.nnz(), want.len());
            for (t, w) in want {
                let i = vocab.index_of(&t).unwrap();
                prop_assert!((v.get(i) - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn df_counts_documents(corpus in docs(), min_count in 1usize..3) {
        let Ok(vocab) = build_vocab(corpus.iter().map(Vec::as_slice), &FeatureConfig::word(1, 1, min_count)) else {
            return Ok(());
        };
        for (t, &df) in vocab.terms.iter().zip(&vocab.df) {
            let want = corpus.iter().filter(|d| d.contains(t)).count();
            prop_assert_eq!(df, want);
            prop_assert!(df >= min_count);
        }
    }

    #[test]
    fn unigrams_ignore_order(corpus in docs(), seed in any::<u64>()) {
        let Ok(vocab) = build_vocab(corpus.iter().map(Vec::as_slice), &FeatureConfig::word(1, 1, 1)) else {
            return Ok(());
        };
        let mut d = corpus[0].clone();
        let k = d.len().max(1);
        d.rotate_left((seed as usize) % k);
        d.reverse();
        prop_assert_eq!(tfidf_vectorize(&d, &vocab), tfidf_vectorize(&corpus[0], &vocab));
    }

    #[test]
    fn hashing_is_stable_and_conserves_mass(corpus in docs(), buckets in 1u32..50) {
        let grams = extract_ngrams(&corpus[0], Unit::Word, 1, 2);
        let v = hash_features(&grams, buckets);
        prop_assert_eq!(&v, &hash_features(&grams, buckets));
        prop_assert_eq!(v.values.iter().sum::<f64>(), grams.len() as f64);
        prop_assert!(v.indices.iter().all(|&i| i < buckets));
    }
}

#[test]
fn ngram_examples() {
    let abc = toks(&["a", "b", "c"]);
    let mut got = extract_ngrams(&abc, Unit::Word, 1, 2);
    got.sort();
    assert_eq!(got, toks(&["a", "a b", "b", "b c", "c"]));
    assert!(extract_ngrams(&toks(&["a"]), Unit::Word, 2, 2).is_empty());
    assert_eq!(extract_ngrams(&toks(&["ကော", "မာ"]), Unit::Syllable, 1, 1), toks(&["ကော", "မာ"]));
}

#[test]
fn two_document_idf() {
    let corpus = [toks(&["a", "b"]), toks(&["b", "c"])];
    let vocab = build_vocab(corpus.iter().map(Vec::as_slice), &FeatureConfig::word(1, 1, 1)).unwrap();
    let a = vocab.index_of("a").unwrap() as usize;
    let b = vocab.index_of("b").unwrap() as usize;
    assert!((vocab.idf(a) - 1.4054651081081644).abs() < 1e-12);
    assert_eq!(vocab.idf(b), 1.0);
    let v = tfidf_vectorize(&corpus[0], &vocab);
    let n = (1.4054651081081644f64.powi(2) + 1.0).sqrt();
    assert!((v.get(a as u32) - 1.4054651081081644 / n).abs() < 1e-12);
    assert!((v.get(b as u32) - 1.0 / n).abs() < 1e-12);
    assert_eq!(tfidf_vectorize(&toks(&["z"]), &vocab).nnz(), 0);
}

#[test]
fn empty_vocab_and_bad_range() {
    let corpus = [toks(&["a"]), toks(&["b"])];
    let err = build_vocab(corpus.iter().map(Vec::as_slice), &FeatureConfig::word(1, 1, 3)).unwrap_err();
    assert_eq!(err, FeatureError::EmptyVocab(3));
    let err = build_vocab(corpus.iter().map(Vec::as_slice), &FeatureConfig::word(2, 1, 1)).unwrap_err();
    assert_eq!(err, FeatureError::BadRange(2, 1));
}

#[test]
fn disjoint_grams_hash_apart() {
    let p: Vec<String> = (0..50).map(|i| format!("p{i}")).collect();
    let q: Vec<String> = (0..50).map(|i| format!("q{i}")).collect();
    let hp: HashSet<u32> = hash_features(&p, 1_000_000).indices.into_iter().collect();
    let hq: HashSet<u32> = hash_features(&q, 1_000_000).indices.into_iter().collect();
    assert!(hp.is_disjoint(&hq));
    let one = hash_features(&p, 1);
    assert_eq!((one.indices.clone(), one.values.clone()), (vec![0], vec![50.0]));
}
