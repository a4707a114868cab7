//! Binary hate/not-hate classifiers: linear SVM, balanced random forest and a
//! fastText-style bag of embeddings, with oversampling, metrics, stratified
//! cross-validation and grid search.

pub mod brf;
mod cv;
pub mod fasttext;
mod metrics;
pub mod svm;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureConfig, FeatureError, SparseVector};

pub use cv::{cross_validate, cross_validate_with_models, grid_search, stratified_folds, FoldModel, GridResult, GridRow};
pub use metrics::{evaluate, ClassMetrics, Confusion, EvalReport};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data has a single class")]
    SingleClass,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("input does not match the model's feature config: {0}")]
    FeatureConfigMismatch(String),
    #[error("prediction and gold ids differ: {0}")]
    IdMismatch(String),
    #[error("minority class has {minority} examples, fewer than k={k}")]
    TooFewMinority { minority: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    BadFolds(usize),
    #[error("empty grid")]
    EmptyGrid,
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error("artifact: {0}")]
    Artifact(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub post_id: String,
    pub tokens: Vec<String>,
    /// true = hate.
    pub label: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(examples: Vec<Example>) -> Self {
        Dataset { examples }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// (hate, not_hate)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.examples.iter().filter(|e| e.label).count();
        (pos, self.examples.len() - pos)
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { examples: idx.iter().map(|&i| self.examples[i].clone()).collect() }
    }

    fn token_slices(&self) -> impl Iterator<Item = &[String]> {
        self.examples.iter().map(|e| e.tokens.as_slice())
    }
}

/// Mixes a base seed with a stream number (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Duplicates minority examples, drawn with replacement, until the classes
/// balance. Originals keep their positions; copies are appended.
pub fn random_oversample(train: &Dataset, seed: u64) -> Result<Dataset, ModelError> {
    let (pos, neg) = train.class_counts();
    if pos == 0 || neg == 0 {
        return Err(ModelError::SingleClass);
    }
    let minority = pos < neg;
    let pool: Vec<usize> = (0..train.len()).filter(|&i| train.examples[i].label == minority).collect();
    let need = pos.abs_diff(neg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = train.clone();
    out.examples.extend((0..need).map(|_| train.examples[pool[rng.gen_range(0..pool.len())]].clone()));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Svm,
    Brf,
    Fasttext,
}

impl std::fmt::Display for ModelType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelType::Svm => "svm",
            ModelType::Brf => "brf",
            ModelType::Fasttext => "fasttext",
        })
    }
}

impl std::str::FromStr for ModelType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "svm" => Ok(ModelType::Svm),
            "brf" => Ok(ModelType::Brf),
            "fasttext" => Ok(ModelType::Fasttext),
            other => Err(format!("unknown model type {other:?} (svm, brf, fasttext)")),
        }
    }
}

/// What to train: learner, its hyperparameters and (for the sparse learners)
/// the n-gram features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "lowercase")]
pub enum ModelSpec {
    Svm { features: FeatureConfig, hyper: svm::SvmHyper },
    Brf { features: FeatureConfig, hyper: brf::BrfHyper },
    Fasttext { hyper: fasttext::FastTextHyper },
}

impl ModelSpec {
    pub fn model_type(&self) -> ModelType {
        match self {
            ModelSpec::Svm { .. } => ModelType::Svm,
            ModelSpec::Brf { .. } => ModelType::Brf,
            ModelSpec::Fasttext { .. } => ModelType::Fasttext,
        }
    }

    /// Library defaults for a learner with word 1-2 gram features.
    pub fn default_for(model_type: ModelType) -> Self {
        let features = FeatureConfig::word(1, 2, 1);
        match model_type {
            ModelType::Svm => ModelSpec::Svm { features, hyper: svm::SvmHyper::default() },
            ModelType::Brf => ModelSpec::Brf { features, hyper: brf::BrfHyper::default() },
            ModelType::Fasttext => ModelSpec::Fasttext { hyper: fasttext::FastTextHyper::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hyperparameters {
    Svm(svm::SvmHyper),
    Brf(brf::BrfHyper),
    Fasttext(fasttext::FastTextHyper),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSpec {
    Vocab(crate::features::Vocab),
    Hashed(fasttext::HashedInput),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Params {
    Svm(svm::SvmParams),
    Brf(brf::BrfParams),
    Fasttext(fasttext::FastTextParams),
}

/// Self-contained trained model. Field order is fixed so identical models
/// serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub model_type: ModelType,
    pub format_version: u32,
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
    pub feature_config: FeatureSpec,
    pub params: Params,
}

/// Per-epoch training trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epoch_loss: Vec<f64>,
}

pub fn train(spec: &ModelSpec, data: &Dataset, seed: u64) -> Result<ModelArtifact, ModelError> {
    train_with_log(spec, data, seed).map(|(m, _)| m)
}

pub fn train_with_log(spec: &ModelSpec, data: &Dataset, seed: u64) -> Result<(ModelArtifact, TrainLog), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let (pos, neg) = data.class_counts();
    if pos == 0 || neg == 0 {
        return Err(ModelError::SingleClass);
    }
    match spec {
        ModelSpec::Svm { features, hyper } => svm::train_svm(data, features, hyper, seed),
        ModelSpec::Brf { features, hyper } => brf::train_brf(data, features, hyper, seed).map(|m| (m, TrainLog::default())),
        ModelSpec::Fasttext { hyper } => fasttext::train_fasttext(data, hyper, seed),
    }
}

/// A post as tokens, or an already featurized vector.
#[derive(Debug, Clone, Copy)]
pub enum ModelInput<'a> {
    Tokens(&'a [String]),
    Vector(&'a SparseVector),
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ModelArtifact {
    /// Hate score in [0,1]; label is `score > 0.5`.
    pub fn score(&self, input: ModelInput<'_>) -> Result<f64, ModelError> {
        match (&self.params, &self.feature_config) {
            (Params::Svm(p), FeatureSpec::Vocab(v)) => Ok(logistic(p.margin(&vectorize(v, input)?))),
            (Params::Brf(p), FeatureSpec::Vocab(v)) => Ok(p.vote_fraction(&vectorize(v, input)?)),
            (Params::Fasttext(p), FeatureSpec::Hashed(h)) => match input {
                ModelInput::Tokens(t) => Ok(p.probability(h, t)),
                ModelInput::Vector(_) => {
                    Err(ModelError::FeatureConfigMismatch("fasttext models take tokens, not vectors".into()))
                }
            },
            _ => Err(ModelError::Artifact("parameters do not match feature config".into())),
        }
    }

    pub fn predict(&self, input: ModelInput<'_>) -> Result<(bool, f64), ModelError> {
        let s = self.score(input)?;
        Ok((s > 0.5, s))
    }

    pub fn predict_tokens(&self, tokens: &[String]) -> (bool, f64) {
        self.predict(ModelInput::Tokens(tokens)).expect("token input always matches")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("artifact serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let mut m: ModelArtifact = serde_json::from_str(s).map_err(|e| ModelError::Artifact(e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(ModelError::Artifact(format!("unsupported format version {}", m.format_version)));
        }
        let consistent = matches!(
            (m.model_type, &m.hyperparameters, &m.params),
            (ModelType::Svm, Hyperparameters::Svm(_), Params::Svm(_))
                | (ModelType::Brf, Hyperparameters::Brf(_), Params::Brf(_))
                | (ModelType::Fasttext, Hyperparameters::Fasttext(_), Params::Fasttext(_))
        );
        if !consistent {
            return Err(ModelError::Artifact("model_type disagrees with parameters".into()));
        }
        if let FeatureSpec::Vocab(v) = &mut m.feature_config {
            v.reindex();
        }
        if let Params::Fasttext(p) = &mut m.params {
            p.reindex();
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|e| ModelError::Io { path: path.display().to_string(), source: e })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Io { path: path.display().to_string(), source: e })?;
        Self::from_json(&s)
    }
}

fn vectorize(vocab: &crate::features::Vocab, input: ModelInput<'_>) -> Result<SparseVector, ModelError> {
    match input {
        ModelInput::Tokens(t) => Ok(crate::features::tfidf_vectorize(t, vocab)),
        ModelInput::Vector(v) => {
            if let Some(&i) = v.indices.iter().find(|&&i| i as usize >= vocab.len()) {
                return Err(ModelError::FeatureConfigMismatch(format!(
                    "index {i} outside vocabulary of {}",
                    vocab.len()
                )));
            }
            Ok(v.clone())
        }
    }
}

pub(crate) fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ds(labels: &[bool]) -> Dataset {
        Dataset::new(
            labels
                .iter()
                .enumerate()
                .map(|(i, &l)| Example { post_id: format!("p{i}"), tokens: vec![format!("t{}", l as u8)], label: l })
                .collect(),
        )
    }

    #[test]
    fn oversample_balances() {
        let mut labels = vec![false; 90];
        labels.extend([true; 10]);
        let d = ds(&labels);
        let o = random_oversample(&d, 1).unwrap();
        assert_eq!(o.class_counts(), (90, 90));
        assert_eq!(&o.examples[..100], &d.examples[..]);
        assert_eq!(random_oversample(&d, 1).unwrap(), o);
        let b = ds(&[true, false]);
        assert_eq!(random_oversample(&b, 3).unwrap(), b);
        assert!(matches!(random_oversample(&ds(&[true, true]), 0), Err(ModelError::SingleClass)));
    }

    #[test]
    fn logistic_midpoint() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0 && logistic(800.0) <= 1.0);
    }

    #[test]
    fn seeds_differ_per_stream() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }
}
