//! Hate-term lexicons: loading, merging and multi-pattern matching.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use aho_corasick::{AhoCorasick, MatchKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::Normalizer;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon {0} has no terms")]
    EmptyLexicon(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HateTerm {
    pub term: String,
    pub source: String,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub terms: Vec<HateTerm>,
    /// Lines dropped because their normalized term was already present.
    pub duplicate_lines: usize,
}

impl Lexicon {
    /// Builds a lexicon from raw terms, normalizing each and collapsing repeats.
    pub fn from_terms(terms: impl IntoIterator<Item = HateTerm>) -> Self {
        let norm = Normalizer::builtin();
        let mut seen = HashSet::new();
        let mut lex = Lexicon::default();
        for mut t in terms {
            t.term = norm.normalize(t.term.trim()).0;
            if t.term.is_empty() {
                continue;
            }
            if seen.insert(t.term.clone()) {
                lex.terms.push(t);
            } else {
                lex.duplicate_lines += 1;
            }
        }
        lex
    }

    /// Parses `term<TAB>source<TAB>note` rows; missing columns fall back to
    /// `source_tag` and an empty note.
    pub fn parse(src: &str, source_tag: &str) -> Self {
        Self::from_terms(src.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#')).map(|l| {
            let mut cols = l.trim_end_matches('\r').splitn(3, '\t');
            let term = cols.next().unwrap_or("").to_string();
            let source = cols.next().map(str::trim).filter(|s| !s.is_empty()).unwrap_or(source_tag).to_string();
            let note = cols.next().unwrap_or("").trim().to_string();
            HateTerm { term, source, note }
        }))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Drops curated exclusions (normalized before comparison).
    pub fn exclude<'a>(&self, excluded: impl IntoIterator<Item = &'a str>) -> Lexicon {
        let norm = Normalizer::builtin();
        let drop: HashSet<String> = excluded.into_iter().map(|t| norm.normalize(t.trim()).0).collect();
        Lexicon {
            terms: self.terms.iter().filter(|t| !drop.contains(&t.term)).cloned().collect(),
            duplicate_lines: self.duplicate_lines,
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# term\tsource\tnote\n");
        for t in &self.terms {
            out.push_str(&format!("{}\t{}\t{}\n", t.term, t.source, t.note));
        }
        out
    }
}

pub fn load_lexicon(path: impl AsRef<Path>, source_tag: &str) -> Result<Lexicon, LexiconError> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path)
        .map_err(|e| LexiconError::FileUnreadable { path: path.display().to_string(), source: e })?;
    let lex = Lexicon::parse(&src, source_tag);
    if lex.is_empty() {
        return Err(LexiconError::EmptyLexicon(path.display().to_string()));
    }
    if lex.duplicate_lines > 0 {
        log::warn!("{}: collapsed {} duplicate term lines", path.display(), lex.duplicate_lines);
    }
    Ok(lex)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateSummary {
    pub count: usize,
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentSummary {
    pub count: usize,
    /// (shorter, longer) with shorter a strict substring of longer.
    pub pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeReport {
    pub exact_duplicates: DuplicateSummary,
    pub containments: ContainmentSummary,
    pub total_terms: usize,
}

/// Union of two lexicons. Exact duplicates keep `a`'s metadata; containments
/// are reported and every term involved is kept.
pub fn merge_lexicons(a: &Lexicon, b: &Lexicon) -> (Lexicon, MergeReport) {
    let in_a: HashSet<&str> = a.terms.iter().map(|t| t.term.as_str()).collect();
    let mut terms = a.terms.clone();
    let mut dups = Vec::new();
    for t in &b.terms {
        if in_a.contains(t.term.as_str()) {
            dups.push(t.term.clone());
        } else {
            terms.push(t.clone());
        }
    }
    let mut pairs = Vec::new();
    for short in &terms {
        for long in &terms {
            if short.term.len() < long.term.len() && long.term.contains(short.term.as_str()) {
                pairs.push((short.term.clone(), long.term.clone()));
            }
        }
    }
    pairs.sort();
    let report = MergeReport {
        exact_duplicates: DuplicateSummary { count: dups.len(), terms: dups },
        containments: ContainmentSummary { count: pairs.len(), pairs },
        total_terms: terms.len(),
    };
    (Lexicon { terms, duplicate_lines: a.duplicate_lines + b.duplicate_lines }, report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermHit {
    pub term: HateTerm,
    /// Codepoint offsets.
    pub start: usize,
    pub end: usize,
    pub post_id: String,
}

/// Automaton over every term of a lexicon.
#[derive(Debug, Clone)]
pub struct Matcher {
    ac: Option<AhoCorasick>,
    terms: Vec<HateTerm>,
}

pub fn build_matcher(lexicon: &Lexicon) -> Matcher {
    let terms: Vec<HateTerm> = lexicon.terms.iter().filter(|t| !t.term.is_empty()).cloned().collect();
    let ac = (!terms.is_empty()).then(|| {
        AhoCorasick::builder()
            .match_kind(MatchKind::Standard)
            .build(terms.iter().map(|t| t.term.as_str()))
            .expect("lexicon automaton")
    });
    Matcher { ac, terms }
}

impl Matcher {
    pub fn terms(&self) -> &[HateTerm] {
        &self.terms
    }

    /// All occurrences, overlaps included, by ascending start then longer first.
    pub fn match_terms(&self, text: &str, post_id: &str) -> Vec<TermHit> {
        let Some(ac) = &self.ac else { return Vec::new() };
        let mut char_at: HashMap<usize, usize> = HashMap::new();
        let mut spans: Vec<(usize, usize, usize)> = ac
            .find_overlapping_iter(text)
            .map(|m| (m.start(), m.end(), m.pattern().as_usize()))
            .collect();
        if spans.is_empty() {
            return Vec::new();
        }
        for (ci, (bi, _)) in text.char_indices().enumerate() {
            char_at.insert(bi, ci);
        }
        let total = text.chars().count();
        spans.sort_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)).then(x.2.cmp(&y.2)));
        spans
            .into_iter()
            .map(|(s, e, p)| TermHit {
                term: self.terms[p].clone(),
                start: char_at[&s],
                end: char_at.get(&e).copied().unwrap_or(total),
                post_id: post_id.to_string(),
            })
            .collect()
    }

    pub fn count(&self, text: &str) -> usize {
        self.ac.as_ref().map_or(0, |ac| ac.find_overlapping_iter(text).count())
    }
}

pub fn match_terms(matcher: &Matcher, text: &str, post_id: &str) -> Vec<TermHit> {
    matcher.match_terms(text, post_id)
}
