//! Syllable and dictionary word segmentation for normalized Burmese text,
//! plus the small text utilities the cleaning pipeline needs.

mod emoji;

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{self, EncodingLabel};
use crate::script::{is_dependent, is_myanmar, ASAT, VIRAMA};

pub use emoji::{strip_emoji, EmojiRanges};

pub const DEFAULT_DICTIONARY: &str = include_str!("../../data/dictionary.txt");
pub const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

const DOT_BELOW: char = '\u{1037}';

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("text is not normalized: Zawgyi evidence present")]
    NotNormalized,
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyllableKind {
    Myanmar,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Syllable {
    pub text: String,
    /// Codepoint offsets into the source.
    pub start: usize,
    pub end: usize,
    pub kind: SyllableKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Inclusive syllable indices.
    pub syllable_span: (usize, usize),
    pub in_dictionary: bool,
    pub kind: SyllableKind,
}

fn is_syllable_base(c: char) -> bool {
    ('\u{1000}'..='\u{102A}').contains(&c)
}

fn is_digit(c: char) -> bool {
    ('\u{1040}'..='\u{1049}').contains(&c)
}

/// True when the consonant at `i` closes the previous syllable: it carries an
/// asat, possibly after a dot below (canonical order puts 1037 before 103A).
fn carries_asat(chars: &[char], i: usize) -> bool {
    match chars.get(i + 1) {
        Some(&ASAT) => true,
        Some(&DOT_BELOW) => chars.get(i + 2) == Some(&ASAT),
        _ => false,
    }
}

fn opens_syllable(chars: &[char], i: usize) -> bool {
    let c = chars[i];
    let prev = i.checked_sub(1).map(|p| chars[p]);
    if is_syllable_base(c) {
        return prev != Some(VIRAMA) && !carries_asat(chars, i);
    }
    if is_dependent(c) {
        return false;
    }
    // Digit runs stay together; every other Myanmar symbol stands alone.
    !(is_digit(c) && prev.is_some_and(is_digit))
}

/// Splits text into Myanmar syllables and maximal non-Myanmar runs.
pub fn segment_syllables(text: &str) -> Result<Vec<Syllable>, SegmentError> {
    if encoding::detect_encoding(text).label == EncodingLabel::Zawgyi {
        return Err(SegmentError::NotNormalized);
    }
    Ok(split_syllables(text))
}

/// Boundary rule without the encoding check; callers guarantee normalized input.
pub fn split_syllables(text: &str) -> Vec<Syllable> {
    let chars: Vec<char> = text.chars().collect();
    let mut out: Vec<Syllable> = Vec::new();
    let mut start = 0;
    for i in 0..chars.len() {
        if i == 0 {
            continue;
        }
        let mm = is_myanmar(chars[i]);
        let boundary = if mm != is_myanmar(chars[i - 1]) { true } else { mm && opens_syllable(&chars, i) };
        if boundary {
            out.push(make(&chars, start, i));
            start = i;
        }
    }
    if !chars.is_empty() {
        out.push(make(&chars, start, chars.len()));
    }
    out
}

fn make(chars: &[char], start: usize, end: usize) -> Syllable {
    let kind = if is_myanmar(chars[start]) { SyllableKind::Myanmar } else { SyllableKind::Other };
    Syllable { text: chars[start..end].iter().collect(), start, end, kind }
}

pub fn myanmar_syllable_count(syllables: &[Syllable]) -> usize {
    syllables.iter().filter(|s| s.kind == SyllableKind::Myanmar).count()
}

/// Word list keyed by surface text, with each entry's syllable length.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    words: HashMap<String, usize>,
    max_len: usize,
}

static BUILTIN_DICTIONARY: LazyLock<Dictionary> = LazyLock::new(|| Dictionary::from_words(DEFAULT_DICTIONARY.lines()));

impl Dictionary {
    pub fn builtin() -> &'static Dictionary {
        &BUILTIN_DICTIONARY
    }

    /// Entries are normalized and segmented with the same rules as the text.
    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut dict = Dictionary::default();
        for w in words {
            let w = w.trim();
            if w.is_empty() || w.starts_with('#') {
                continue;
            }
            let (norm, _) = encoding::Normalizer::builtin().normalize(w);
            let n = split_syllables(&norm).len();
            dict.max_len = dict.max_len.max(n);
            dict.words.insert(norm, n);
        }
        dict
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SegmentError> {
        Ok(Self::from_words(read(path.as_ref())?.lines()))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains_key(word)
    }
}

fn read(path: &Path) -> Result<String, SegmentError> {
    std::fs::read_to_string(path)
        .map_err(|e| SegmentError::FileUnreadable { path: path.display().to_string(), source: e })
}

/// Greedy longest match over each run of Myanmar syllables.
pub fn segment_words(syllables: &[Syllable], dictionary: &Dictionary) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < syllables.len() {
        if syllables[i].kind == SyllableKind::Other {
            tokens.push(Token {
                text: syllables[i].text.clone(),
                syllable_span: (i, i),
                in_dictionary: false,
                kind: SyllableKind::Other,
            });
            i += 1;
            continue;
        }
        let run_end = syllables[i..]
            .iter()
            .position(|s| s.kind != SyllableKind::Myanmar)
            .map_or(syllables.len(), |p| i + p);
        let longest = dictionary.max_len.min(run_end - i);
        let mut matched = None;
        for n in (1..=longest).rev() {
            let cand: String = syllables[i..i + n].iter().map(|s| s.text.as_str()).collect();
            if dictionary.words.get(&cand) == Some(&n) {
                matched = Some((n, cand));
                break;
            }
        }
        let (n, text, in_dictionary) = match matched {
            Some((n, cand)) => (n, cand, true),
            None => (1, syllables[i].text.clone(), false),
        };
        tokens.push(Token { text, syllable_span: (i, i + n - 1), in_dictionary, kind: SyllableKind::Myanmar });
        i += n;
    }
    tokens
}

#[derive(Debug, Clone, Default)]
pub struct Stoplist(HashSet<String>);

static BUILTIN_STOPLIST: LazyLock<Stoplist> = LazyLock::new(|| Stoplist::from_words(DEFAULT_STOPWORDS.lines()));

impl Stoplist {
    pub fn builtin() -> &'static Stoplist {
        &BUILTIN_STOPLIST
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        Stoplist(
            words
                .into_iter()
                .map(str::trim)
                .filter(|w| !w.is_empty() && !w.starts_with('#'))
                .map(|w| encoding::Normalizer::builtin().normalize(w).0)
                .collect(),
        )
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SegmentError> {
        Ok(Self::from_words(read(path.as_ref())?.lines()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn remove_stopwords(tokens: Vec<Token>, stoplist: &Stoplist) -> Vec<Token> {
    tokens.into_iter().filter(|t| !stoplist.contains(&t.text)).collect()
}

/// Myanmar-block codepoints over non-whitespace codepoints; 0 when there are none.
pub fn burmese_ratio(text: &str) -> f64 {
    let mut total = 0usize;
    let mut mm = 0usize;
    for c in text.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        mm += is_myanmar(c) as usize;
    }
    if total == 0 {
        0.0
    } else {
        mm as f64 / total as f64
    }
}
