//! Linear SVM trained with Pegasos (stochastic subgradient on the hinge loss)
//! over TF-IDF vectors. The bias is a weight on a constant feature.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{shuffled, Dataset, FeatureSpec, Hyperparameters, ModelArtifact, ModelError, ModelType, Params, TrainLog};
use crate::features::{build_vocab, tfidf_vectorize, FeatureConfig, SparseVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmHyper {
    /// Regularization strength.
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmHyper {
    fn default() -> Self {
        SvmHyper { lambda: 1e-4, epochs: 15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl SvmParams {
    pub fn margin(&self, x: &SparseVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }
}

/// w = scale * v, so the shrink step is O(1).
struct Scaled {
    v: Vec<f64>,
    b: f64,
    scale: f64,
    sq: f64,
}

impl Scaled {
    fn margin(&self, x: &SparseVector) -> f64 {
        self.scale * (x.dot(&self.v) + self.b)
    }

    fn shrink(&mut self, f: f64) {
        if f <= 0.0 {
            self.v.iter_mut().for_each(|w| *w = 0.0);
            self.b = 0.0;
            self.scale = 1.0;
            self.sq = 0.0;
            return;
        }
        self.scale *= f;
        self.sq *= f * f;
        if self.scale < 1e-9 {
            self.flush();
        }
    }

    fn flush(&mut self) {
        let s = self.scale;
        self.v.iter_mut().for_each(|w| *w *= s);
        self.b *= s;
        self.scale = 1.0;
    }

    /// w += a * (x, 1)
    fn add(&mut self, x: &SparseVector, a: f64) {
        let k = a / self.scale;
        let mut dsq = 0.0;
        for (i, xv) in x.iter() {
            let old = self.v[i];
            self.v[i] += k * xv;
            dsq += self.v[i] * self.v[i] - old * old;
        }
        let old = self.b;
        self.b += k;
        dsq += self.b * self.b - old * old;
        self.sq += dsq * self.scale * self.scale;
    }
}

fn objective(lambda: f64, w: &Scaled, xs: &[SparseVector], ys: &[f64]) -> f64 {
    let hinge: f64 = xs.iter().zip(ys).map(|(x, y)| (1.0 - y * w.margin(x)).max(0.0)).sum();
    0.5 * lambda * w.sq + hinge / xs.len() as f64
}

/// Pegasos on raw sparse vectors of dimension `dim`.
pub fn fit(
    xs: &[SparseVector],
    labels: &[bool],
    dim: usize,
    hyper: &SvmHyper,
    seed: u64,
) -> Result<(SvmParams, TrainLog), ModelError> {
    if !(labels.contains(&true) && labels.contains(&false)) {
        return Err(ModelError::SingleClass);
    }
    if let Some(i) = xs.iter().flat_map(|x| x.indices.iter()).find(|&&i| i as usize >= dim) {
        return Err(ModelError::FeatureConfigMismatch(format!("index {i} outside dimension {dim}")));
    }
    let ys: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let lambda = hyper.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut w = Scaled { v: vec![0.0; dim], b: 0.0, scale: 1.0, sq: 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = TrainLog::default();
    let mut t = 0u64;
    for epoch in 0..hyper.epochs {
        for i in shuffled(xs.len(), &mut rng) {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let m = ys[i] * w.margin(&xs[i]);
            w.shrink(1.0 - eta * lambda);
            if m < 1.0 {
                w.add(&xs[i], eta * ys[i]);
            }
            let norm = w.sq.max(0.0).sqrt();
            if norm > radius {
                w.shrink(radius / norm);
            }
        }
        let obj = objective(lambda, &w, xs, &ys);
        if !obj.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        log::debug!("svm epoch {epoch}: objective {obj:.6}");
        log.epoch_loss.push(obj);
    }
    w.flush();
    Ok((SvmParams { weights: w.v, bias: w.b }, log))
}

/// Regularized hinge objective of stored parameters.
pub fn objective_of(params: &SvmParams, lambda: f64, xs: &[SparseVector], labels: &[bool]) -> f64 {
    let hinge: f64 = xs
        .iter()
        .zip(labels)
        .map(|(x, &l)| (1.0 - if l { 1.0 } else { -1.0 } * params.margin(x)).max(0.0))
        .sum();
    let sq: f64 = params.weights.iter().map(|w| w * w).sum::<f64>() + params.bias * params.bias;
    0.5 * lambda * sq + hinge / xs.len() as f64
}

pub(crate) fn train_svm(
    data: &Dataset,
    features: &FeatureConfig,
    hyper: &SvmHyper,
    seed: u64,
) -> Result<(ModelArtifact, TrainLog), ModelError> {
    let vocab = build_vocab(data.token_slices(), features)?;
    let xs: Vec<SparseVector> = data.examples.iter().map(|e| tfidf_vectorize(&e.tokens, &vocab)).collect();
    let labels: Vec<bool> = data.examples.iter().map(|e| e.label).collect();
    let (params, log) = fit(&xs, &labels, vocab.len(), hyper, seed)?;
    let artifact = ModelArtifact {
        model_type: ModelType::Svm,
        format_version: super::FORMAT_VERSION,
        seed,
        hyperparameters: Hyperparameters::Svm(hyper.clone()),
        feature_config: FeatureSpec::Vocab(vocab),
        params: Params::Svm(params),
    };
    Ok((artifact, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Example, ModelInput, ModelSpec};

    fn separable() -> Dataset {
        let mut ex = Vec::new();
        for i in 0..40 {
            let hate = i % 4 == 0;
            let word = if hate { "bad" } else { "fine" };
            ex.push(Example {
                post_id: format!("p{i}"),
                tokens: vec![word.into(), format!("n{}", i % 7)],
                label: hate,
            });
        }
        Dataset::new(ex)
    }

    #[test]
    fn separates_and_logs() {
        let spec = ModelSpec::Svm { features: FeatureConfig::word(1, 1, 1), hyper: SvmHyper { lambda: 1e-3, epochs: 10 } };
        let (m, log) = crate::models::train_with_log(&spec, &separable(), 3).unwrap();
        assert_eq!(log.epoch_loss.len(), 10);
        assert!(log.epoch_loss.iter().all(|l| l.is_finite()));
        for e in &separable().examples {
            let (label, score) = m.predict(ModelInput::Tokens(&e.tokens)).unwrap();
            assert_eq!(label, e.label, "{score}");
        }
    }

    #[test]
    fn one_dimensional_separable() {
        let xs = vec![
            SparseVector { indices: vec![0], values: vec![-1.0] },
            SparseVector { indices: vec![0], values: vec![1.0] },
        ];
        let (p, _) = fit(&xs, &[false, true], 1, &SvmHyper { lambda: 0.01, epochs: 50 }, 0).unwrap();
        assert!(p.margin(&SparseVector { indices: vec![0], values: vec![2.0] }) > 0.0);
        assert!(matches!(fit(&xs, &[true, true], 1, &SvmHyper::default(), 0), Err(ModelError::SingleClass)));
    }

    #[test]
    fn scaled_norm_tracks_dense_norm() {
        let x = SparseVector { indices: vec![0, 2], values: vec![0.6, 0.8] };
        let mut w = Scaled { v: vec![0.0; 3], b: 0.0, scale: 1.0, sq: 0.0 };
        w.add(&x, 2.0);
        w.shrink(0.5);
        w.add(&x, -0.25);
        w.flush();
        let dense: f64 = w.v.iter().map(|v| v * v).sum::<f64>() + w.b * w.b;
        assert!((dense - w.sq).abs() < 1e-12);
    }
}
