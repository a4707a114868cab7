use std::collections::HashMap;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::shuffle::constrained_shuffle;
use super::{CleanPost, RawPost};
use crate::encoding::Normalizer;
use crate::lexicon::Matcher;
use crate::segment::{
    burmese_ratio, myanmar_syllable_count, remove_stopwords, segment_words, split_syllables, strip_emoji, Dictionary,
    Stoplist, SyllableKind,
};

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[A-Za-z][A-Za-z0-9+.\-]*://\S+|www\.\S+)$").unwrap());

/// `scheme://...` or `www....` with no whitespace.
pub fn is_url(token: &str) -> bool {
    URL.is_match(token)
}

/// Removes posts that are empty, whitespace-only or nothing but URLs.
pub fn drop_non_text(posts: Vec<RawPost>) -> Vec<RawPost> {
    posts.into_iter().filter(|p| p.text.split_whitespace().any(|t| !is_url(t))).collect()
}

/// One post per id: the latest fetch, ties going to the later record. Kept
/// records stay in input order.
pub fn dedup_latest(posts: Vec<RawPost>) -> Vec<RawPost> {
    let mut best: HashMap<&str, usize> = HashMap::new();
    for (i, p) in posts.iter().enumerate() {
        match best.get(p.post_id.as_str()) {
            Some(&j) if posts[j].fetched_at > p.fetched_at => {}
            _ => {
                best.insert(p.post_id.as_str(), i);
            }
        }
    }
    let mut keep = vec![false; posts.len()];
    for &i in best.values() {
        keep[i] = true;
    }
    posts.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub min_syllables: usize,
    pub ratio_threshold: f64,
    pub encoding_threshold: f64,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn with_seed(seed: u64) -> Self {
        PipelineConfig { min_syllables: 3, ratio_threshold: 0.5, encoding_threshold: 0.5, seed }
    }
}

/// Immutable lookup structures the pipeline reads.
#[derive(Debug, Clone)]
pub struct CleanResources {
    pub matcher: Matcher,
    pub dictionary: Dictionary,
    pub stoplist: Stoplist,
    pub normalizer: Normalizer,
}

impl CleanResources {
    pub fn with_matcher(matcher: Matcher) -> Self {
        CleanResources {
            matcher,
            dictionary: Dictionary::builtin().clone(),
            stoplist: Stoplist::builtin().clone(),
            normalizer: Normalizer::builtin().clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCount {
    pub name: String,
    pub input_count: usize,
    pub output_count: usize,
    pub removed_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub steps: Vec<StepCount>,
    pub seed: u64,
    pub config: PipelineConfig,
    pub zawgyi_converted: usize,
    pub shuffle_adjacencies: usize,
}

impl PipelineReport {
    fn step(&mut self, name: &str, input: usize, output: usize) {
        self.steps.push(StepCount {
            name: name.to_string(),
            input_count: input,
            output_count: output,
            removed_count: input - output,
        });
    }
}

struct Working {
    raw: RawPost,
    text: String,
    was_zawgyi: bool,
    syllable_count: usize,
}

/// Runs every cleaning step in order and records per-step counts.
pub fn clean_pipeline(
    posts: Vec<RawPost>,
    config: &PipelineConfig,
    res: &CleanResources,
) -> Result<(Vec<CleanPost>, PipelineReport), crate::encoding::EncodingError> {
    let normalizer = if config.encoding_threshold == res.normalizer.detector().threshold() {
        res.normalizer.clone()
    } else {
        res.normalizer.with_threshold(config.encoding_threshold)?
    };
    let mut report = PipelineReport {
        steps: Vec::new(),
        seed: config.seed,
        config: config.clone(),
        zawgyi_converted: 0,
        shuffle_adjacencies: 0,
    };

    let n0 = posts.len();
    let posts = drop_non_text(posts);
    report.step("drop_non_text", n0, posts.len());

    let n = posts.len();
    let posts = dedup_latest(posts);
    report.step("dedup_latest", n, posts.len());

    let n = posts.len();
    let mut work: Vec<Working> = posts
        .into_par_iter()
        .map(|raw| {
            let (text, was_zawgyi) = normalizer.normalize(&raw.text);
            Working { raw, text, was_zawgyi, syllable_count: 0 }
        })
        .collect();
    report.zawgyi_converted = work.iter().filter(|w| w.was_zawgyi).count();
    report.step("normalize", n, work.len());

    work.par_iter_mut().for_each(|w| w.text = strip_emoji(&w.text));
    report.step("strip_emoji", n, work.len());

    let n = work.len();
    work.retain(|w| burmese_ratio(&w.text) >= config.ratio_threshold);
    report.step("language_filter", n, work.len());

    let n = work.len();
    work.par_iter_mut().for_each(|w| w.syllable_count = myanmar_syllable_count(&split_syllables(&w.text)));
    work.retain(|w| w.syllable_count >= config.min_syllables);
    report.step("syllable_filter", n, work.len());

    // Shuffle the raw records, then reattach the cleaned text by position.
    let n = work.len();
    let mut by_id: HashMap<String, Working> = HashMap::with_capacity(n);
    let raws: Vec<RawPost> = work
        .into_iter()
        .map(|w| {
            let raw = w.raw.clone();
            by_id.insert(raw.post_id.clone(), w);
            raw
        })
        .collect();
    let (shuffled, outcome) = constrained_shuffle(raws, config.seed);
    report.shuffle_adjacencies = outcome.remaining_adjacencies;
    let work: Vec<Working> = shuffled.into_iter().map(|r| by_id.remove(&r.post_id).unwrap()).collect();
    report.step("constrained_shuffle", n, work.len());

    let n = work.len();
    let clean: Vec<CleanPost> = work
        .into_par_iter()
        .map(|w| {
            let syllables = split_syllables(&w.text);
            let tokens = remove_stopwords(segment_words(&syllables, &res.dictionary), &res.stoplist);
            let tokens = tokens
                .into_iter()
                .flat_map(|t| match t.kind {
                    SyllableKind::Myanmar => vec![t.text],
                    SyllableKind::Other => t
                        .text
                        .split_whitespace()
                        .filter(|s| !res.stoplist.contains(s))
                        .map(str::to_string)
                        .collect(),
                })
                .collect();
            let lexicon_hits = res.matcher.match_terms(&w.text, &w.raw.post_id);
            CleanPost {
                post_id: w.raw.post_id,
                source_id: w.raw.source_id,
                text: w.text,
                was_zawgyi: w.was_zawgyi,
                syllable_count: w.syllable_count,
                tokens,
                lexicon_hits,
                url: w.raw.url,
            }
        })
        .collect();
    report.step("tokenize", n, clean.len());
    if clean.is_empty() {
        log::warn!("cleaning pipeline produced an empty corpus");
    }
    Ok((clean, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{build_matcher, HateTerm, Lexicon};
    use chrono::{TimeZone, Utc};

    fn post(id: &str, src: &str, text: &str, fetched: i64) -> RawPost {
        RawPost {
            post_id: id.into(),
            source_id: src.into(),
            source_name: String::new(),
            created_at: None,
            fetched_at: Some(Utc.timestamp_opt(fetched, 0).unwrap()),
            text: text.into(),
            url: None,
            interactions: 0,
        }
    }

    #[test]
    fn non_text_rules() {
        let kept = drop_non_text(vec![
            post("1", "s", "http://a.b", 0),
            post("2", "s", "", 0),
            post("3", "s", "hello http://a.b", 0),
            post("4", "s", " www.x.org  https://y ", 0),
            post("5", "s", "   ", 0),
        ]);
        assert_eq!(kept.iter().map(|p| p.post_id.as_str()).collect::<Vec<_>>(), vec!["3"]);
    }

    #[test]
    fn dedup_keeps_latest_then_later_record() {
        let out = dedup_latest(vec![
            post("a", "s", "old", 1),
            post("b", "s", "only", 1),
            post("a", "s", "new", 2),
            post("c", "s", "first", 5),
            post("c", "s", "second", 5),
            post("a", "s", "stale", 0),
        ]);
        let got: Vec<_> = out.iter().map(|p| (p.post_id.as_str(), p.text.as_str())).collect();
        assert_eq!(got, vec![("b", "only"), ("a", "new"), ("c", "second")]);
    }

    #[test]
    fn pipeline_filters_and_reports() {
        let lex = Lexicon::from_terms([HateTerm { term: "ကုလား".into(), source: "t".into(), note: String::new() }]);
        let res = CleanResources::with_matcher(build_matcher(&lex));
        let posts = vec![
            post("en", "s1", "pure english text", 0),
            post("two", "s1", "မြန်မာ", 0),
            post("ok", "s2", "ဒီကုလား တွေ 😀 အရမ်းဆိုး", 0),
            post("zg", "s1", "ေမာင္ေမာင္ ေက်ာင္းသြားသည္", 0),
            post("url", "s3", "https://t.co/x", 0),
        ];
        let (clean, rep) = clean_pipeline(posts, &PipelineConfig::with_seed(7), &res).unwrap();
        let ids: Vec<_> = clean.iter().map(|p| p.post_id.as_str()).collect();
        assert_eq!(ids.len(), 2);
        assert!(ids.contains(&"ok") && ids.contains(&"zg"));
        for w in rep.steps.windows(2) {
            assert_eq!(w[0].output_count, w[1].input_count);
        }
        let removed: Vec<_> = rep.steps.iter().map(|s| (s.name.as_str(), s.removed_count)).collect();
        assert_eq!(removed[0], ("drop_non_text", 1));
        assert_eq!(removed[4], ("language_filter", 1));
        assert_eq!(removed[5], ("syllable_filter", 1));
        let ok = clean.iter().find(|p| p.post_id == "ok").unwrap();
        assert!(!ok.text.contains('😀'));
        assert_eq!(ok.lexicon_hits.len(), 1);
        assert!(!ok.tokens.iter().any(|t| t == "တွေ"));
        let zg = clean.iter().find(|p| p.post_id == "zg").unwrap();
        assert!(zg.was_zawgyi);
        assert_eq!(zg.text, "မောင်မောင် ကျောင်းသွားသည်");
        assert_eq!(rep.zawgyi_converted, 1);
    }
}
