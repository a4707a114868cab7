//! Zawgyi detection and Zawgyi-to-Unicode conversion.
//!
//! Detection counts matches of two curated pattern lists (Zawgyi-indicative
//! and Unicode-indicative). Conversion runs an ordered rewrite-rule table and
//! then puts every cluster into canonical sign order. Both tables ship as
//! data files and can be replaced at runtime.

mod order;
pub mod rules;

use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use order::canonical_order;
pub use rules::{RewriteRule, RuleTable};

pub const DEFAULT_RULES_TSV: &str = include_str!("../../data/zawgyi_rules.tsv");
pub const DEFAULT_MARKERS_TSV: &str = include_str!("../../data/encoding_markers.tsv");
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Upper bound on detect/convert rounds in [`Normalizer::normalize`].
const MAX_NORMALIZE_ROUNDS: usize = 8;

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("rule table invalid at line {line}: {reason}")]
    RuleTableInvalid { line: usize, reason: String },
    #[error("marker table invalid at line {line}: {reason}")]
    MarkerTableInvalid { line: usize, reason: String },
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("threshold must lie strictly between 0 and 1, got {0}")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingLabel {
    Zawgyi,
    Unicode,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingVerdict {
    pub label: EncodingLabel,
    /// Fraction of marker evidence that is Zawgyi-indicative; 0 when there is none.
    pub score: f64,
    pub zawgyi_marker_count: usize,
    pub unicode_marker_count: usize,
}

#[derive(Debug, Clone)]
pub struct MarkerTable {
    zawgyi: Vec<Regex>,
    unicode: Vec<Regex>,
}

impl MarkerTable {
    /// Parses `zawgyi<TAB>pattern` / `unicode<TAB>pattern` rows.
    pub fn from_tsv(src: &str) -> Result<Self, EncodingError> {
        let mut zawgyi = Vec::new();
        let mut unicode = Vec::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let invalid = |reason: String| EncodingError::MarkerTableInvalid { line: idx + 1, reason };
            let (kind, pattern) = line
                .split_once('\t')
                .ok_or_else(|| invalid("expected kind<TAB>pattern".into()))?;
            let re = Regex::new(pattern).map_err(|e| invalid(format!("bad pattern: {e}")))?;
            match kind.trim() {
                "zawgyi" => zawgyi.push(re),
                "unicode" => unicode.push(re),
                other => return Err(invalid(format!("unknown marker kind {other:?}"))),
            }
        }
        Ok(MarkerTable { zawgyi, unicode })
    }

    fn count(patterns: &[Regex], text: &str) -> usize {
        patterns.iter().map(|p| p.find_iter(text).count()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Detector {
    markers: MarkerTable,
    threshold: f64,
}

impl Detector {
    pub fn new(markers: MarkerTable, threshold: f64) -> Result<Self, EncodingError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(EncodingError::InvalidThreshold(threshold));
        }
        Ok(Detector { markers, threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self, EncodingError> {
        Detector::new(self.markers.clone(), threshold)
    }

    pub fn detect(&self, text: &str) -> EncodingVerdict {
        let z = MarkerTable::count(&self.markers.zawgyi, text);
        let u = MarkerTable::count(&self.markers.unicode, text);
        let (label, score) = if z + u == 0 {
            (EncodingLabel::Neutral, 0.0)
        } else {
            let score = z as f64 / (z + u) as f64;
            // Ties go to Unicode: converting real Unicode corrupts it.
            let label = if score > self.threshold { EncodingLabel::Zawgyi } else { EncodingLabel::Unicode };
            (label, score)
        };
        EncodingVerdict { label, score, zawgyi_marker_count: z, unicode_marker_count: u }
    }
}

/// Detector plus conversion table. Immutable once built and safe to share.
#[derive(Debug, Clone)]
pub struct Normalizer {
    detector: Detector,
    rules: RuleTable,
}

static BUILTIN: LazyLock<Normalizer> = LazyLock::new(|| {
    let markers = MarkerTable::from_tsv(DEFAULT_MARKERS_TSV).expect("built-in marker table");
    let rules = RuleTable::from_tsv(DEFAULT_RULES_TSV).expect("built-in rule table");
    Normalizer::new(Detector::new(markers, DEFAULT_THRESHOLD).unwrap(), rules)
});

impl Normalizer {
    pub fn new(detector: Detector, rules: RuleTable) -> Self {
        Normalizer { detector, rules }
    }

    /// The shipped marker and rule tables with the default threshold.
    pub fn builtin() -> &'static Normalizer {
        &BUILTIN
    }

    /// Loads custom tables; `None` falls back to the shipped table.
    pub fn from_files(
        rules: Option<&Path>,
        markers: Option<&Path>,
        threshold: f64,
    ) -> Result<Self, EncodingError> {
        let rules = match rules {
            Some(p) => RuleTable::from_path(p)?,
            None => BUILTIN.rules.clone(),
        };
        let markers = match markers {
            Some(p) => {
                let src = std::fs::read_to_string(p).map_err(|e| EncodingError::FileUnreadable {
                    path: p.display().to_string(),
                    source: e,
                })?;
                MarkerTable::from_tsv(&src)?
            }
            None => BUILTIN.detector.markers.clone(),
        };
        Ok(Normalizer::new(Detector::new(markers, threshold)?, rules))
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self, EncodingError> {
        Ok(Normalizer { detector: self.detector.with_threshold(threshold)?, rules: self.rules.clone() })
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    pub fn rules(&self) -> &RuleTable {
        &self.rules
    }

    pub fn detect(&self, text: &str) -> EncodingVerdict {
        self.detector.detect(text)
    }

    /// Converts text the caller already judged to be Zawgyi.
    pub fn zawgyi_to_unicode(&self, text: &str) -> String {
        canonical_order(&self.rules.apply(text))
    }

    /// Detects, converts when the verdict is Zawgyi, and canonicalizes sign
    /// order. Repeats until the text is stable so the result is a fixed point.
    pub fn normalize(&self, text: &str) -> (String, bool) {
        let mut current = text.to_string();
        let mut was_zawgyi = false;
        for _ in 0..MAX_NORMALIZE_ROUNDS {
            let next = if self.detect(&current).label == EncodingLabel::Zawgyi {
                was_zawgyi = true;
                self.zawgyi_to_unicode(&current)
            } else {
                canonical_order(&current)
            };
            if next == current {
                return (next, was_zawgyi);
            }
            current = next;
        }
        log::warn!("normalization did not settle after {MAX_NORMALIZE_ROUNDS} rounds");
        (current, was_zawgyi)
    }
}

/// Detects with the shipped markers and the default threshold.
pub fn detect_encoding(text: &str) -> EncodingVerdict {
    BUILTIN.detect(text)
}

/// Converts with the shipped rule table.
pub fn zawgyi_to_unicode(text: &str) -> String {
    BUILTIN.zawgyi_to_unicode(text)
}

/// Normalizes with the shipped tables at the given detection threshold.
pub fn normalize(text: &str, threshold: f64) -> Result<(String, bool), EncodingError> {
    if threshold == DEFAULT_THRESHOLD {
        return Ok(BUILTIN.normalize(text));
    }
    Ok(BUILTIN.with_threshold(threshold)?.normalize(text))
}
