//! Labelling plan: paired batches and solo lists, label records, agreement
//! statistics, adjudication and characteristic reporting.

mod agreement;
mod store;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agreement::{
    agreement_timeline, cohen_kappa, cohen_kappa_decisions, fleiss_kappa, pair_round_agreement, percent_agreement,
    percent_agreement_decisions, AgreementTimeline, Marginal, PairRow,
};
pub use store::{read_labels, write_labels, Adjudication, AuditEntry, LabelStore, LABEL_COLUMNS};

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("need an even number of annotators (at least 2), got {0}")]
    OddAnnotatorCount(usize),
    #[error("duplicate annotator {0}")]
    DuplicateAnnotator(String),
    #[error("duplicate post {0}")]
    DuplicatePost(String),
    #[error("paired phase needs {needed} posts, have {available} ({shortfall} short)")]
    InsufficientPosts { needed: usize, available: usize, shortfall: usize },
    #[error("annotators labelled different post sets: {0}")]
    BatchMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("ragged decision matrix: {0}")]
    RaggedMatrix(String),
    #[error("missing label for post {0}")]
    MissingLabel(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("labels file line {line}: {reason}")]
    BadLabelRow { line: usize, reason: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Decision {
    Yes,
    No,
}

impl Decision {
    pub fn is_yes(self) -> bool {
        self == Decision::Yes
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Yes => "Yes",
            Decision::No => "No",
        })
    }
}

impl std::str::FromStr for Decision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" => Ok(Decision::Yes),
            "no" | "n" => Ok(Decision::No),
            other => Err(format!("decision must be Yes or No, got {other:?}")),
        }
    }
}

pub const DEFAULT_CHARACTERISTICS: [&str; 10] = [
    "race",
    "ethnicity",
    "national origin",
    "disability",
    "religious affiliation",
    "caste",
    "sexual orientation",
    "sex",
    "gender identity",
    "serious disease",
];

/// The configured list of protected characteristics labels may use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Characteristics {
    pub names: Vec<String>,
}

impl Default for Characteristics {
    fn default() -> Self {
        Characteristics { names: DEFAULT_CHARACTERISTICS.iter().map(|s| s.to_string()).collect() }
    }
}

impl Characteristics {
    pub fn new(names: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Characteristics { names: names.into_iter().map(Into::into).collect() }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// Characteristics must be non-empty exactly for Yes, drawn from the list, without repeats.
    pub fn validate(&self, decision: Decision, chosen: &[String]) -> Result<(), AnnotationError> {
        match (decision, chosen.is_empty()) {
            (Decision::Yes, true) => {
                return Err(AnnotationError::InvalidLabel("a Yes label needs at least one characteristic".into()))
            }
            (Decision::No, false) => {
                return Err(AnnotationError::InvalidLabel("a No label cannot carry characteristics".into()))
            }
            _ => {}
        }
        let mut seen = HashSet::new();
        for c in chosen {
            if !self.contains(c) {
                return Err(AnnotationError::InvalidLabel(format!("unknown characteristic {c:?}")));
            }
            if !seen.insert(c) {
                return Err(AnnotationError::InvalidLabel(format!("characteristic {c:?} repeated")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub post_id: String,
    pub annotator_id: String,
    /// Paired round from 1; 0 for the solo phase.
    pub round: u32,
    pub decision: Decision,
    pub characteristics: Vec<String>,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentConfig {
    pub batch_size: usize,
    pub paired_rounds: usize,
    pub seed: u64,
}

impl AssignmentConfig {
    pub fn with_seed(seed: u64) -> Self {
        AssignmentConfig { batch_size: 100, paired_rounds: 4, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoloList {
    pub annotator: String,
    pub posts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    pub pairs: Vec<(String, String)>,
    /// `rounds[pair][round - 1]` is the batch both members of the pair label.
    pub rounds: Vec<Vec<Vec<String>>>,
    pub solo: Vec<SoloList>,
}

impl AssignmentPlan {
    pub fn pair_index(&self, annotator: &str) -> Option<usize> {
        self.pairs.iter().position(|(a, b)| a == annotator || b == annotator)
    }

    pub fn partner(&self, annotator: &str) -> Option<&str> {
        self.pairs.iter().find_map(|(a, b)| {
            if a == annotator {
                Some(b.as_str())
            } else if b == annotator {
                Some(a.as_str())
            } else {
                None
            }
        })
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.first().map_or(0, Vec::len)
    }

    pub fn annotators(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().flat_map(|(a, b)| [a.as_str(), b.as_str()])
    }

    /// Posts an annotator labels in `round`; round 0 is the solo list.
    pub fn batch_for(&self, annotator: &str, round: u32) -> Option<&[String]> {
        if round == 0 {
            return self.solo.iter().find(|s| s.annotator == annotator).map(|s| s.posts.as_slice());
        }
        let p = self.pair_index(annotator)?;
        self.rounds[p].get(round as usize - 1).map(Vec::as_slice)
    }

    /// Rounds (0 for solo) in which `annotator` is assigned `post_id`.
    pub fn round_of(&self, annotator: &str, post_id: &str) -> Option<u32> {
        if let Some(p) = self.pair_index(annotator) {
            if let Some(r) = self.rounds[p].iter().position(|b| b.iter().any(|x| x == post_id)) {
                return Some(r as u32 + 1);
            }
        }
        self.batch_for(annotator, 0)?.iter().any(|x| x == post_id).then_some(0)
    }

    pub fn all_posts(&self) -> BTreeSet<&str> {
        self.rounds
            .iter()
            .flatten()
            .flatten()
            .chain(self.solo.iter().flat_map(|s| &s.posts))
            .map(String::as_str)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Pairs annotators in seeded random order, deals the paired batches from the
/// front of `posts`, and spreads the rest round-robin over all annotators.
pub fn make_assignments(
    annotators: &[String],
    posts: &[String],
    config: &AssignmentConfig,
) -> Result<AssignmentPlan, AnnotationError> {
    if annotators.is_empty() || annotators.len() % 2 == 1 {
        return Err(AnnotationError::OddAnnotatorCount(annotators.len()));
    }
    let mut seen = HashSet::new();
    if let Some(a) = annotators.iter().find(|a| !seen.insert(a.as_str())) {
        return Err(AnnotationError::DuplicateAnnotator(a.clone()));
    }
    let mut seen = HashSet::new();
    if let Some(p) = posts.iter().find(|p| !seen.insert(p.as_str())) {
        return Err(AnnotationError::DuplicatePost(p.clone()));
    }
    let n_pairs = annotators.len() / 2;
    let needed = n_pairs * config.paired_rounds * config.batch_size;
    if posts.len() < needed {
        return Err(AnnotationError::InsufficientPosts {
            needed,
            available: posts.len(),
            shortfall: needed - posts.len(),
        });
    }
    let mut order = annotators.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let pairs: Vec<(String, String)> = order.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
    let mut rounds = vec![Vec::with_capacity(config.paired_rounds); n_pairs];
    let mut next = posts.iter();
    for _ in 0..config.paired_rounds {
        for pair_rounds in rounds.iter_mut() {
            pair_rounds.push(next.by_ref().take(config.batch_size).cloned().collect());
        }
    }
    let mut solo: Vec<SoloList> = order.iter().map(|a| SoloList { annotator: a.clone(), posts: Vec::new() }).collect();
    for (i, p) in next.enumerate() {
        let k = i % solo.len();
        solo[k].posts.push(p.clone());
    }
    Ok(AssignmentPlan { pairs, rounds, solo })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// One annotator only (solo phase).
    Single,
    Agreed,
    NeedsFacilitator,
    Facilitator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalLabel {
    pub post_id: String,
    /// None while a disagreement awaits the facilitator.
    pub decision: Option<Decision>,
    pub resolution: Resolution,
    pub characteristics: Vec<String>,
    pub audit: Vec<String>,
}

fn union_characteristics<'a>(labels: impl Iterator<Item = &'a LabelRecord>) -> Vec<String> {
    labels.flat_map(|l| l.characteristics.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Resolves a post labelled by both members of a pair.
pub fn adjudicate(
    post_id: &str,
    labels: &[LabelRecord],
    facilitator: Option<Decision>,
) -> Result<FinalLabel, AnnotationError> {
    let mine: Vec<&LabelRecord> = labels.iter().filter(|l| l.post_id == post_id).collect();
    let annotators: BTreeSet<&str> = mine.iter().map(|l| l.annotator_id.as_str()).collect();
    if annotators.len() < 2 {
        return Err(AnnotationError::MissingLabel(post_id.to_string()));
    }
    let decisions: BTreeSet<Decision> = mine.iter().map(|l| l.decision).collect();
    let summary = mine.iter().map(|l| format!("{}={}", l.annotator_id, l.decision)).collect::<Vec<_>>().join(", ");
    let agreed = (decisions.len() == 1).then(|| *decisions.iter().next().unwrap());
    let out = match (agreed, facilitator) {
        (Some(d), None) => FinalLabel {
            post_id: post_id.to_string(),
            decision: Some(d),
            resolution: Resolution::Agreed,
            characteristics: if d.is_yes() { union_characteristics(mine.iter().copied()) } else { Vec::new() },
            audit: Vec::new(),
        },
        (None, None) => FinalLabel {
            post_id: post_id.to_string(),
            decision: None,
            resolution: Resolution::NeedsFacilitator,
            characteristics: Vec::new(),
            audit: vec![format!("disagreement: {summary}")],
        },
        (_, Some(f)) => FinalLabel {
            post_id: post_id.to_string(),
            decision: Some(f),
            resolution: Resolution::Facilitator,
            characteristics: if f.is_yes() {
                union_characteristics(mine.iter().copied().filter(|l| l.decision.is_yes()))
            } else {
                Vec::new()
            },
            audit: vec![format!("facilitator decided {f} over {summary}")],
        },
    };
    Ok(out)
}

/// One final label per labelled post, in post id order. Solo posts keep their
/// single record; paired posts go through [`adjudicate`].
pub fn final_labels(labels: &[LabelRecord], facilitator: &BTreeMap<String, Decision>) -> Vec<FinalLabel> {
    let mut by_post: BTreeMap<&str, Vec<LabelRecord>> = BTreeMap::new();
    for l in labels {
        by_post.entry(l.post_id.as_str()).or_default().push(l.clone());
    }
    by_post
        .into_iter()
        .map(|(post, recs)| {
            let distinct: BTreeSet<&str> = recs.iter().map(|r| r.annotator_id.as_str()).collect();
            if distinct.len() == 1 {
                let r = &recs[recs.len() - 1];
                match facilitator.get(post) {
                    Some(&f) if f != r.decision => FinalLabel {
                        post_id: post.to_string(),
                        decision: Some(f),
                        resolution: Resolution::Facilitator,
                        characteristics: Vec::new(),
                        audit: vec![format!("facilitator decided {f} over {}={}", r.annotator_id, r.decision)],
                    },
                    _ => FinalLabel {
                        post_id: post.to_string(),
                        decision: Some(r.decision),
                        resolution: Resolution::Single,
                        characteristics: r.characteristics.clone(),
                        audit: Vec::new(),
                    },
                }
            } else {
                adjudicate(post, &recs, facilitator.get(post).copied()).expect("two annotators present")
            }
        })
        .collect()
}

/// Characteristic counts over Yes posts, most frequent first, ties alphabetical.
pub fn characteristics_distribution(finals: &[FinalLabel]) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for f in finals.iter().filter(|f| f.decision == Some(Decision::Yes)) {
        for c in &f.characteristics {
            *counts.entry(c.as_str()).or_default() += 1;
        }
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    pub(crate) fn rec(post: &str, ann: &str, d: Decision, chars: &[&str]) -> LabelRecord {
        LabelRecord {
            post_id: post.into(),
            annotator_id: ann.into(),
            round: 1,
            decision: d,
            characteristics: chars.iter().map(|s| s.to_string()).collect(),
            timestamp: DateTime::from_timestamp(0, 0).unwrap(),
        }
    }

    #[test]
    fn small_plan() {
        let cfg = AssignmentConfig { batch_size: 100, paired_rounds: 1, seed: 3 };
        let plan = make_assignments(&ids("a", 2), &ids("p", 200), &cfg).unwrap();
        assert_eq!(plan.pairs.len(), 1);
        assert_eq!(plan.rounds[0][0].len(), 100);
        assert_eq!(plan.solo.iter().map(|s| s.posts.len()).collect::<Vec<_>>(), vec![50, 50]);
        let (a, b) = &plan.pairs[0];
        assert_eq!(plan.batch_for(a, 1), plan.batch_for(b, 1));
        assert_eq!(plan.round_of(a, &plan.rounds[0][0][5]), Some(1));
    }

    #[test]
    fn plan_errors() {
        let cfg = AssignmentConfig::with_seed(0);
        assert!(matches!(make_assignments(&ids("a", 3), &ids("p", 10), &cfg), Err(AnnotationError::OddAnnotatorCount(3))));
        match make_assignments(&ids("a", 2), &ids("p", 350), &cfg) {
            Err(AnnotationError::InsufficientPosts { needed: 400, available: 350, shortfall: 50 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation() {
        let c = Characteristics::default();
        assert!(c.validate(Decision::Yes, &[]).is_err());
        assert!(c.validate(Decision::No, &["race".into()]).is_err());
        assert!(c.validate(Decision::Yes, &["astrology".into()]).is_err());
        assert!(c.validate(Decision::Yes, &["race".into(), "race".into()]).is_err());
        assert!(c.validate(Decision::Yes, &["race".into(), "caste".into()]).is_ok());
        assert!(c.validate(Decision::No, &[]).is_ok());
    }

    #[test]
    fn adjudication_cases() {
        let yy = [rec("p", "a", Decision::Yes, &["race"]), rec("p", "b", Decision::Yes, &["caste"])];
        let f = adjudicate("p", &yy, None).unwrap();
        assert_eq!((f.decision, f.resolution), (Some(Decision::Yes), Resolution::Agreed));
        assert_eq!(f.characteristics, vec!["caste", "race"]);
        let yn = [rec("p", "a", Decision::Yes, &["race"]), rec("p", "b", Decision::No, &[])];
        assert_eq!(adjudicate("p", &yn, None).unwrap().resolution, Resolution::NeedsFacilitator);
        let f = adjudicate("p", &yn, Some(Decision::No)).unwrap();
        assert_eq!(f.decision, Some(Decision::No));
        assert_eq!(f.audit.len(), 1);
        assert!(f.audit[0].contains("a=Yes"));
        assert!(matches!(adjudicate("p", &yn[..1], None), Err(AnnotationError::MissingLabel(_))));
    }

    #[test]
    fn distribution_order() {
        let fin = |c: &[&str]| FinalLabel {
            post_id: String::new(),
            decision: Some(Decision::Yes),
            resolution: Resolution::Agreed,
            characteristics: c.iter().map(|s| s.to_string()).collect(),
            audit: vec![],
        };
        let d = characteristics_distribution(&[fin(&["religion"]), fin(&["religion"]), fin(&["religion", "ethnicity"])]);
        assert_eq!(d, vec![("religion".to_string(), 3), ("ethnicity".to_string(), 1)]);
        let d = characteristics_distribution(&[fin(&["b"]), fin(&["a"])]);
        assert_eq!(d[0].0, "a");
        assert!(characteristics_distribution(&[]).is_empty());
    }

    #[test]
    fn finals_mix_solo_and_pairs() {
        let labels = vec![
            rec("s", "a", Decision::No, &[]),
            rec("p", "a", Decision::Yes, &["race"]),
            rec("p", "b", Decision::No, &[]),
        ];
        let f = final_labels(&labels, &BTreeMap::new());
        assert_eq!(f[0].post_id, "p");
        assert_eq!(f[0].resolution, Resolution::NeedsFacilitator);
        assert_eq!(f[1].resolution, Resolution::Single);
        let mut fac = BTreeMap::new();
        fac.insert("p".to_string(), Decision::Yes);
        assert_eq!(final_labels(&labels, &fac)[0].characteristics, vec!["race"]);
    }
}
