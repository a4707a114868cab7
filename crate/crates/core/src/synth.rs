//! Synthetic Burmese-like corpus with a known label per post. Hate posts lean
//! on a small term list, so lexicon hits correlate with the label, and
//! sources are skewed the way page-level scraping tends to be.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CleanPost, RawPost};
use crate::lexicon::{HateTerm, Lexicon};
use crate::models::{Dataset, Example};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_posts: usize,
    pub positive_rate: f64,
    pub n_sources: usize,
    pub vocab_size: usize,
    pub n_terms: usize,
    /// Chance a hate post contains a lexicon term.
    pub term_rate_pos: f64,
    /// Chance a benign post contains one.
    pub term_rate_neg: f64,
    /// Append rows the cleaning pipeline should drop or convert.
    pub noise: bool,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_posts: usize, seed: u64) -> Self {
        SynthConfig {
            n_posts,
            positive_rate: 0.04,
            n_sources: 50,
            vocab_size: 3000,
            n_terms: 40,
            term_rate_pos: 0.75,
            term_rate_neg: 0.02,
            noise: false,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub posts: Vec<RawPost>,
    /// Label per post id, true = hate.
    pub labels: BTreeMap<String, bool>,
    pub terms: Vec<String>,
}

impl SynthCorpus {
    pub fn lexicon(&self) -> Lexicon {
        Lexicon::from_terms(self.terms.iter().map(|t| HateTerm {
            term: t.clone(),
            source: "synthetic".into(),
            note: String::new(),
        }))
    }

    /// Labelled examples for the cleaned posts that carry a label.
    pub fn dataset(&self, clean: &[CleanPost]) -> Dataset {
        Dataset::new(
            clean
                .iter()
                .filter_map(|p| {
                    self.labels.get(&p.post_id).map(|&label| Example {
                        post_id: p.post_id.clone(),
                        tokens: p.tokens.clone(),
                        label,
                    })
                })
                .collect(),
        )
    }
}

const CONSONANTS: &str = "ကခဂဃငစဆဇညတထဒဓနပဖဗဘမယရလဝသဟအ";
const MEDIALS: [&str; 4] = ["", "", "ျ", "ြ"];
const RHYMES: [&str; 24] = [
    "", "ာ", "ိ", "ီ", "ု", "ူ", "ေ", "ဲ", "ော", "ို", "င်", "န်", "မ်", "တ်", "က်", "ပ်", "ိန်", "ုန်", "ိတ်", "ုတ်",
    "ောင်", "ောက်", "ိုင်", "ိုက်",
];

fn syllable(rng: &mut ChaCha8Rng, consonants: &[char]) -> String {
    let c = consonants[rng.gen_range(0..consonants.len())];
    let medial = MEDIALS[rng.gen_range(0..MEDIALS.len())];
    let rhyme = RHYMES[rng.gen_range(0..RHYMES.len())];
    format!("{c}{medial}{rhyme}")
}

fn word(rng: &mut ChaCha8Rng, consonants: &[char], syllables: usize) -> String {
    (0..syllables).map(|_| syllable(rng, consonants)).collect()
}

/// Zawgyi spelling of a medial-free syllable: the E sign moves in front and
/// asat becomes U+1039.
fn to_zawgyi_simple(s: &str) -> String {
    let mut out = String::new();
    for syl in crate::segment::split_syllables(s) {
        let t = syl.text;
        if t.contains('\u{1031}') {
            out.push('\u{1031}');
        }
        out.extend(t.chars().filter(|&c| c != '\u{1031}').map(|c| if c == '\u{103A}' { '\u{1039}' } else { c }));
    }
    out
}

pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let consonants: Vec<char> = CONSONANTS.chars().collect();

    let mut seen = BTreeSet::new();
    let mut vocab = Vec::with_capacity(config.vocab_size);
    while vocab.len() < config.vocab_size {
        let n = [1, 1, 2, 2, 2, 3][rng.gen_range(0..6)];
        let w = word(&mut rng, &consonants, n);
        if seen.insert(w.clone()) {
            vocab.push(w);
        }
    }
    let mut terms = Vec::with_capacity(config.n_terms);
    while terms.len() < config.n_terms {
        let n = 2 + rng.gen_range(0..2);
        let w = word(&mut rng, &consonants, n);
        if seen.insert(w.clone()) {
            terms.push(w);
        }
    }
    // words that lean hateful without being lexicon terms
    let context: Vec<usize> = (0..40).map(|_| rng.gen_range(50..config.vocab_size)).collect();
    let zipf = WeightedIndex::new((0..config.vocab_size).map(|r| 1.0 / (r as f64 + 1.0))).unwrap();
    let source_pick = WeightedIndex::new((0..config.n_sources).map(|r| 1.0 / (r as f64 + 2.0))).unwrap();
    let base: DateTime<Utc> = DateTime::from_timestamp(1_600_000_000, 0).unwrap();

    let n_pos = (config.n_posts as f64 * config.positive_rate).round() as usize;
    let mut is_pos: Vec<bool> = (0..config.n_posts).map(|i| i < n_pos).collect();
    is_pos.shuffle(&mut rng);

    let mut posts = Vec::with_capacity(config.n_posts);
    let mut labels = BTreeMap::new();
    for (i, &pos) in is_pos.iter().enumerate() {
        let len = rng.gen_range(5..16);
        let mut words: Vec<&str> = Vec::with_capacity(len + 2);
        for _ in 0..len {
            let w = if pos && rng.gen_bool(0.2) {
                &vocab[context[rng.gen_range(0..context.len())]]
            } else if !pos && rng.gen_bool(0.01) {
                &vocab[context[rng.gen_range(0..context.len())]]
            } else {
                &vocab[zipf.sample(&mut rng)]
            };
            words.push(w);
        }
        let term_rate = if pos { config.term_rate_pos } else { config.term_rate_neg };
        if rng.gen_bool(term_rate) {
            let k = if pos && rng.gen_bool(0.3) { 2 } else { 1 };
            for _ in 0..k {
                let at = rng.gen_range(0..=words.len());
                words.insert(at, &terms[rng.gen_range(0..terms.len())]);
            }
        }
        let src = source_pick.sample(&mut rng);
        let created = base + Duration::minutes(i as i64 * 7);
        let id = format!("syn{i:06}");
        labels.insert(id.clone(), pos);
        posts.push(RawPost {
            post_id: id,
            source_id: format!("src{src:02}"),
            source_name: format!("Page {src}"),
            created_at: Some(created),
            fetched_at: Some(created + Duration::days(1)),
            text: words.join(" "),
            url: Some(format!("https://example.org/p/{i}")),
            interactions: rng.gen_range(0..500),
        });
    }

    if config.noise {
        add_noise(&mut posts, &mut labels, &vocab, &mut rng, base);
    }
    SynthCorpus { posts, labels, terms }
}

fn add_noise(
    posts: &mut Vec<RawPost>,
    labels: &mut BTreeMap<String, bool>,
    vocab: &[String],
    rng: &mut ChaCha8Rng,
    base: DateTime<Utc>,
) {
    let n = posts.len();
    let k = (n / 40).max(1);
    let template = |id: String, text: String, src: usize| RawPost {
        post_id: id,
        source_id: format!("src{src:02}"),
        source_name: format!("Page {src}"),
        created_at: Some(base),
        fetched_at: Some(base + Duration::days(2)),
        text,
        url: None,
        interactions: 0,
    };
    let plain: Vec<&String> = vocab.iter().filter(|w| !w.contains(['ျ', 'ြ'])).collect();
    for j in 0..k {
        let src = rng.gen_range(0..10);
        posts.push(template(format!("url{j}"), "https://fb.com/x/".to_string() + &j.to_string(), src));
        posts.push(template(format!("empty{j}"), if j % 2 == 0 { String::new() } else { "   ".into() }, src));
        posts.push(template(format!("en{j}"), "this post is written entirely in english words".into(), src));
        posts.push(template(format!("short{j}"), vocab[0].clone(), src));
        let victim = rng.gen_range(0..n);
        let mut stale = posts[victim].clone();
        stale.text = format!("{} {}", stale.text, vocab[1]);
        stale.fetched_at = stale.created_at;
        posts.push(stale);
        let zg_words: Vec<String> = (0..6).map(|_| to_zawgyi_simple(plain[rng.gen_range(0..plain.len())])).collect();
        let id = format!("zg{j}");
        labels.insert(id.clone(), false);
        let mut zg = template(id, zg_words.join(" "), src);
        zg.fetched_at = Some(base + Duration::days(3));
        posts.push(zg);
        let id = format!("emoji{j}");
        labels.insert(id.clone(), false);
        let text = format!("{} 😀 {} {} 🙏", vocab[rng.gen_range(0..50)], vocab[rng.gen_range(0..50)], vocab[rng.gen_range(0..50)]);
        posts.push(template(id, text, src));
    }
    posts.shuffle(rng);
}
