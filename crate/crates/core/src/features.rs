//! Sparse text features: word, syllable and character n-grams with TF-IDF
//! weighting, plus a hashed bag for bucketed models.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CleanPost;
use crate::segment::split_syllables;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("no n-gram reaches min_count {0}")]
    EmptyVocab(usize),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid n-gram range {0}..={1}")]
    BadRange(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Word,
    Char,
    Syllable,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub unit: Unit,
    pub n_lo: usize,
    pub n_hi: usize,
    pub min_count: usize,
}

impl FeatureConfig {
    pub fn word(n_lo: usize, n_hi: usize, min_count: usize) -> Self {
        FeatureConfig { unit: Unit::Word, n_lo, n_hi, min_count }
    }

    pub fn char(n_lo: usize, n_hi: usize, min_count: usize) -> Self {
        FeatureConfig { unit: Unit::Char, n_lo, n_hi, min_count }
    }

    fn check(&self) -> Result<(), FeatureError> {
        if self.n_lo == 0 || self.n_lo > self.n_hi {
            return Err(FeatureError::BadRange(self.n_lo, self.n_hi));
        }
        Ok(())
    }
}

/// Word 1, word 1-2 and char 2-5, each at min_count 1, 2 and 5.
pub fn default_feature_grid() -> Vec<FeatureConfig> {
    let mut grid = Vec::new();
    for min_count in [1, 2, 5] {
        grid.push(FeatureConfig::word(1, 1, min_count));
        grid.push(FeatureConfig::word(1, 2, min_count));
        grid.push(FeatureConfig::char(2, 5, min_count));
    }
    grid
}

const JOIN: char = ' ';

fn push_ngrams(units: &[&str], lo: usize, hi: usize, out: &mut Vec<String>) {
    for n in lo..=hi {
        if n > units.len() {
            break;
        }
        for w in units.windows(n) {
            let mut s = String::new();
            for (i, u) in w.iter().enumerate() {
                if i > 0 {
                    s.push(JOIN);
                }
                s.push_str(u);
            }
            out.push(s);
        }
    }
}

/// Contiguous n-grams, `lo..=hi`, over tokens, syllables, or codepoints within
/// each token. Returned as a multiset (repeats kept).
pub fn extract_ngrams(tokens: &[String], unit: Unit, lo: usize, hi: usize) -> Vec<String> {
    let mut out = Vec::new();
    if lo == 0 || lo > hi {
        return out;
    }
    match unit {
        Unit::Word => {
            let units: Vec<&str> = tokens.iter().map(String::as_str).collect();
            push_ngrams(&units, lo, hi, &mut out);
        }
        Unit::Syllable => {
            let syl: Vec<String> = tokens.iter().flat_map(|t| split_syllables(t)).map(|s| s.text).collect();
            let units: Vec<&str> = syl.iter().map(String::as_str).collect();
            push_ngrams(&units, lo, hi, &mut out);
        }
        Unit::Char => {
            for t in tokens {
                let cs: Vec<char> = t.chars().collect();
                for n in lo..=hi.min(cs.len()) {
                    out.extend(cs.windows(n).map(|w| w.iter().collect::<String>()));
                }
            }
        }
    }
    out
}

pub fn post_ngrams(post: &CleanPost, unit: Unit, lo: usize, hi: usize) -> Vec<String> {
    extract_ngrams(&post.tokens, unit, lo, hi)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn from_map(m: BTreeMap<u32, f64>) -> Self {
        let (indices, values) = m.into_iter().unzip();
        SparseVector { indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().zip(&self.values).map(|(&i, &v)| (i as usize, v))
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| dense.get(i).copied().unwrap_or(0.0) * v).sum()
    }

    pub fn get(&self, index: u32) -> f64 {
        self.indices.binary_search(&index).map_or(0.0, |p| self.values[p])
    }

    fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= n);
        }
    }
}

/// N-gram to column mapping with document frequencies. Columns are assigned
/// in lexicographic n-gram order so a vocab is reproducible from its corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    pub config: FeatureConfig,
    pub n_docs: usize,
    pub terms: Vec<String>,
    pub df: Vec<usize>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, ngram: &str) -> Option<u32> {
        if self.index.is_empty() && !self.terms.is_empty() {
            return self.terms.binary_search_by(|t| t.as_str().cmp(ngram)).ok().map(|i| i as u32);
        }
        self.index.get(ngram).copied()
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
    }

    /// Smoothed inverse document frequency of column `i`.
    pub fn idf(&self, i: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df[i] as f64)).ln() + 1.0
    }

    pub fn ngrams(&self, tokens: &[String]) -> Vec<String> {
        extract_ngrams(tokens, self.config.unit, self.config.n_lo, self.config.n_hi)
    }
}

pub fn build_vocab<'a>(
    docs: impl IntoIterator<Item = &'a [String]>,
    config: &FeatureConfig,
) -> Result<Vocab, FeatureError> {
    config.check()?;
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut n_docs = 0;
    for tokens in docs {
        n_docs += 1;
        let mut grams = extract_ngrams(tokens, config.unit, config.n_lo, config.n_hi);
        grams.sort_unstable();
        grams.dedup();
        for g in grams {
            *df.entry(g).or_default() += 1;
        }
    }
    if n_docs == 0 {
        return Err(FeatureError::EmptyCorpus);
    }
    let (terms, df): (Vec<String>, Vec<usize>) = df.into_iter().filter(|(_, d)| *d >= config.min_count).unzip();
    if terms.is_empty() {
        return Err(FeatureError::EmptyVocab(config.min_count));
    }
    let mut vocab = Vocab { config: config.clone(), n_docs, terms, df, index: HashMap::new() };
    vocab.reindex();
    Ok(vocab)
}

/// Raw term frequency times smoothed idf, L2-normalized. Unknown n-grams are ignored.
pub fn tfidf_vectorize(tokens: &[String], vocab: &Vocab) -> SparseVector {
    let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
    for g in vocab.ngrams(tokens) {
        if let Some(i) = vocab.index_of(&g) {
            *tf.entry(i).or_default() += 1.0;
        }
    }
    for (i, w) in tf.iter_mut() {
        *w *= vocab.idf(*i as usize);
    }
    let mut v = SparseVector::from_map(tf);
    v.normalize();
    v
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over UTF-8 bytes; stable across runs and platforms.
pub fn fnv1a64(s: &str) -> u64 {
    s.bytes().fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Counts per hash bucket; colliding n-grams add up.
pub fn hash_features(ngrams: &[String], buckets: u32) -> SparseVector {
    let buckets = buckets.max(1) as u64;
    let mut m: BTreeMap<u32, f64> = BTreeMap::new();
    for g in ngrams {
        *m.entry((fnv1a64(g) % buckets) as u32).or_default() += 1.0;
    }
    SparseVector::from_map(m)
}
