//! Expert review of model output on fresh posts: inference, sampling for
//! review and error categorization.

use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::Decision;
use crate::corpus::CleanPost;
use crate::models::{ModelArtifact, ModelError, ModelInput};

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("asked for {requested} items, only {available} available")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("{0} items have no expert label")]
    MissingExpertLabels(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    LexiconFalsePositive,
    NonArchetypalFalseNegative,
    OtherError,
    Correct,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        ErrorCategory::LexiconFalsePositive,
        ErrorCategory::NonArchetypalFalseNegative,
        ErrorCategory::OtherError,
        ErrorCategory::Correct,
    ];

    pub fn of(model: Decision, expert: Decision, lexicon_hits: usize) -> Self {
        match (model, expert) {
            (a, b) if a == b => ErrorCategory::Correct,
            (Decision::Yes, Decision::No) if lexicon_hits > 0 => ErrorCategory::LexiconFalsePositive,
            (Decision::No, Decision::Yes) if lexicon_hits == 0 => ErrorCategory::NonArchetypalFalseNegative,
            _ => ErrorCategory::OtherError,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub post_id: String,
    pub model_label: Decision,
    pub model_score: f64,
    pub expert_label: Option<Decision>,
    pub lexicon_hit_count: usize,
    pub error_category: Option<ErrorCategory>,
}

impl ReviewItem {
    /// Sets the expert label and the matching category together.
    pub fn set_expert(&mut self, expert: Decision) {
        self.expert_label = Some(expert);
        self.error_category = Some(ErrorCategory::of(self.model_label, expert, self.lexicon_hit_count));
    }
}

fn decision(b: bool) -> Decision {
    if b {
        Decision::Yes
    } else {
        Decision::No
    }
}

/// One item per post, in input order.
pub fn infer_batch(model: &ModelArtifact, posts: &[CleanPost]) -> Result<Vec<ReviewItem>, ReviewError> {
    posts
        .par_iter()
        .map(|p| {
            let (label, score) = model.predict(ModelInput::Tokens(&p.tokens))?;
            Ok(ReviewItem {
                post_id: p.post_id.clone(),
                model_label: decision(label),
                model_score: score,
                expert_label: None,
                lexicon_hit_count: p.lexicon_hits.len(),
                error_category: None,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uncertainty,
    Random,
    TopPositive,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uncertainty" => Ok(Strategy::Uncertainty),
            "random" => Ok(Strategy::Random),
            "top_positive" | "top-positive" => Ok(Strategy::TopPositive),
            other => Err(format!("unknown strategy {other:?} (uncertainty, random, top_positive)")),
        }
    }
}

/// Picks `n` items. Uncertainty: closest to 0.5 first; top_positive: highest
/// score first; both break ties by post id. Random is seeded.
pub fn sample_for_review(
    items: &[ReviewItem],
    strategy: Strategy,
    n: usize,
    seed: u64,
) -> Result<Vec<ReviewItem>, ReviewError> {
    if n > items.len() {
        return Err(ReviewError::SampleTooLarge { requested: n, available: items.len() });
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    match strategy {
        Strategy::Uncertainty => idx.sort_by(|&a, &b| {
            let (x, y) = (&items[a], &items[b]);
            (x.model_score - 0.5)
                .abs()
                .total_cmp(&(y.model_score - 0.5).abs())
                .then_with(|| x.post_id.cmp(&y.post_id))
        }),
        Strategy::TopPositive => idx.sort_by(|&a, &b| {
            let (x, y) = (&items[a], &items[b]);
            y.model_score.total_cmp(&x.model_score).then_with(|| x.post_id.cmp(&y.post_id))
        }),
        Strategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            idx = sample_indices(&mut rng, items.len(), n).into_vec();
        }
    }
    Ok(idx.into_iter().take(n).map(|i| items[i].clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorAnalysis {
    pub counts: BTreeMap<ErrorCategory, usize>,
    pub items: Vec<ReviewItem>,
}

/// Categorizes every expert-labelled item; all items must carry a label.
pub fn disagreement_report(items: &[ReviewItem]) -> Result<ErrorAnalysis, ReviewError> {
    let missing = items.iter().filter(|i| i.expert_label.is_none()).count();
    if missing > 0 {
        return Err(ReviewError::MissingExpertLabels(missing));
    }
    let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
    let items: Vec<ReviewItem> = items
        .iter()
        .map(|i| {
            let mut i = i.clone();
            i.set_expert(i.expert_label.unwrap());
            *counts.get_mut(&i.error_category.unwrap()).unwrap() += 1;
            i
        })
        .collect();
    Ok(ErrorAnalysis { counts, items })
}
