use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{Confusion, EvalReport};
use super::{derive_seed, random_oversample, train, Dataset, ModelArtifact, ModelError, ModelSpec};

/// Fold number for each example. Each class is shuffled on its own and dealt
/// round-robin, continuing where the previous class stopped, so per-class and
/// total fold sizes differ by at most one.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>, ModelError> {
    if k < 2 {
        return Err(ModelError::BadFolds(k));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let minority = pos.min(labels.len() - pos);
    if minority < k {
        return Err(ModelError::TooFewMinority { minority, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(fold)
}

/// One cross-validation fold with the model trained for it.
#[derive(Debug, Clone)]
pub struct FoldModel {
    pub fold: usize,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub artifact: ModelArtifact,
    /// (post_id, label, score) for the test part.
    pub predictions: Vec<(String, bool, f64)>,
}

pub fn cross_validate(
    data: &Dataset,
    spec: &ModelSpec,
    k: usize,
    seed: u64,
    oversample: bool,
) -> Result<EvalReport, ModelError> {
    cross_validate_with_models(data, spec, k, seed, oversample).map(|(r, _)| r)
}

/// Stratified k-fold run. Only the training part of a fold is oversampled and
/// featurized; the pooled report counts every example exactly once.
pub fn cross_validate_with_models(
    data: &Dataset,
    spec: &ModelSpec,
    k: usize,
    seed: u64,
    oversample: bool,
) -> Result<(EvalReport, Vec<FoldModel>), ModelError> {
    let labels: Vec<bool> = data.examples.iter().map(|e| e.label).collect();
    let folds = stratified_folds(&labels, k, seed)?;
    let results: Vec<Result<(FoldModel, Confusion), ModelError>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
            let test_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == f).collect();
            let mut train_set = data.subset(&train_idx);
            if oversample {
                train_set = random_oversample(&train_set, derive_seed(seed, 2000 + f as u64))?;
            }
            let artifact = train(spec, &train_set, derive_seed(seed, 1000 + f as u64))?;
            let mut c = Confusion::default();
            let mut predictions = Vec::with_capacity(test_idx.len());
            for &i in &test_idx {
                let e = &data.examples[i];
                let (label, score) = artifact.predict_tokens(&e.tokens);
                match (label, e.label) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, true) => c.fn_ += 1,
                    (false, false) => c.tn += 1,
                }
                predictions.push((e.post_id.clone(), label, score));
            }
            let fm = FoldModel {
                fold: f,
                train_ids: train_idx.iter().map(|&i| data.examples[i].post_id.clone()).collect(),
                test_ids: test_idx.iter().map(|&i| data.examples[i].post_id.clone()).collect(),
                artifact,
                predictions,
            };
            Ok((fm, c))
        })
        .collect();
    let mut pooled = Confusion::default();
    let mut fold_reports = Vec::with_capacity(k);
    let mut models = Vec::with_capacity(k);
    for r in results {
        let (fm, c) = r?;
        pooled.add(&c);
        fold_reports.push(EvalReport::from_confusion(c));
        models.push(fm);
    }
    let mut report = EvalReport::from_confusion(pooled);
    report.folds = fold_reports;
    Ok((report, models))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub spec: ModelSpec,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: usize,
    pub rows: Vec<GridRow>,
}

impl GridResult {
    pub fn best_spec(&self) -> &ModelSpec {
        &self.rows[self.best].spec
    }
}

/// Cross-validates every grid point with the same folds and picks the highest
/// macro-F1; ties go to the earlier point.
pub fn grid_search(
    data: &Dataset,
    grid: &[ModelSpec],
    k: usize,
    seed: u64,
    oversample: bool,
) -> Result<GridResult, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut best = 0;
    for (i, spec) in grid.iter().enumerate() {
        let report = cross_validate(data, spec, k, seed, oversample)?;
        log::info!("grid point {i}: macro-F1 {:.4}", report.macro_f1);
        if i > 0 && report.macro_f1 > rows.iter().map(|r: &GridRow| r.report.macro_f1).fold(f64::MIN, f64::max) {
            best = i;
        }
        rows.push(GridRow { spec: spec.clone(), report });
    }
    Ok(GridResult { best, rows })
}
