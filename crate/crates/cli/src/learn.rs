use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use hatelab_core::annotation::{final_labels, read_labels, Decision};
use hatelab_core::corpus::{read_jsonl, CleanPost};
use hatelab_core::features::default_feature_grid;
use hatelab_core::models::{
    cross_validate, derive_seed, evaluate as score_predictions, grid_search, random_oversample, train_with_log,
    Dataset, EvalReport, Example, GridResult, ModelArtifact, ModelSpec, ModelType,
};
use hatelab_core::review::{disagreement_report, infer_batch, sample_for_review, ReviewItem, Strategy};
use serde::Serialize;

use crate::data::{apply_clean_inputs, clean_posts};
use crate::{
    data, need, need_seed, pick, report, usage, CliError, CorpusSource, EvaluateArgs, PredictArgs, ReviewReportArgs,
    RunConfig, SampleArgs, TrainArgs,
};

/// Stream for the final model's oversampling draw.
const FINAL_OVERSAMPLE_STREAM: u64 = 0x0F17A1;

/// Decided post -> hate, from any labels-format file (raw or adjudicated).
pub fn gold(path: &Path) -> Result<BTreeMap<String, bool>, CliError> {
    let records = read_labels(path).map_err(data)?;
    let finals = final_labels(&records, &BTreeMap::new());
    let undecided = finals.iter().filter(|f| f.decision.is_none()).count();
    if undecided > 0 {
        log::warn!("{undecided} posts in {} await adjudication and are left out", path.display());
    }
    Ok(finals.into_iter().filter_map(|f| f.decision.map(|d| (f.post_id, d == Decision::Yes))).collect())
}

/// Posts from `--corpus`, or cleaned from `--in` (which needs a seed).
fn posts(src: &CorpusSource, cfg: &mut RunConfig, seed: Option<u64>, stage: &str) -> Result<Vec<CleanPost>, CliError> {
    if let Some(input) = &src.input {
        apply_clean_inputs(&src.clean, cfg);
        let seed = need_seed(seed, cfg, stage)?;
        cfg.paths.posts = Some(input.clone());
        cfg.paths.corpus = None;
        return clean_posts(input, cfg, seed).map(|(p, _)| p);
    }
    let corpus = need(pick(&src.corpus, &cfg.paths.corpus), "--corpus")?;
    cfg.paths.corpus = Some(corpus.clone());
    read_jsonl(&corpus).map_err(data)
}

pub fn dataset(posts: &[CleanPost], gold: &BTreeMap<String, bool>) -> Dataset {
    let examples: Vec<Example> = posts
        .iter()
        .filter_map(|p| {
            gold.get(&p.post_id).map(|&label| Example { post_id: p.post_id.clone(), tokens: p.tokens.clone(), label })
        })
        .collect();
    if examples.len() < gold.len() {
        log::warn!("{} labelled posts are not in the corpus", gold.len() - examples.len());
    }
    Dataset::new(examples)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| data(format!("{what} {}: {e}", path.display())))
}

fn resolve_spec(a: &TrainArgs, cfg: &RunConfig) -> Result<ModelSpec, CliError> {
    match (&a.spec, a.model) {
        (Some(p), m) => {
            let s: ModelSpec = read_json(p, "spec")?;
            match m {
                Some(m) if m != s.model_type() => {
                    Err(usage(format!("--model {m} disagrees with --spec ({})", s.model_type())))
                }
                _ => Ok(s),
            }
        }
        (None, Some(m)) => {
            Ok(cfg.model.spec.clone().filter(|s| s.model_type() == m).unwrap_or_else(|| ModelSpec::default_for(m)))
        }
        (None, None) => cfg
            .model
            .spec
            .clone()
            .or_else(|| cfg.model.model.map(ModelSpec::default_for))
            .ok_or_else(|| usage("--model is required")),
    }
}

fn feature_grid(spec: &ModelSpec) -> Result<Vec<ModelSpec>, CliError> {
    let grid = default_feature_grid();
    match spec {
        ModelSpec::Svm { hyper, .. } => {
            Ok(grid.into_iter().map(|features| ModelSpec::Svm { features, hyper: hyper.clone() }).collect())
        }
        ModelSpec::Brf { hyper, .. } => {
            Ok(grid.into_iter().map(|features| ModelSpec::Brf { features, hyper: hyper.clone() }).collect())
        }
        ModelSpec::Fasttext { .. } => Err(usage("--default-grid applies to svm and brf")),
    }
}

#[derive(Serialize)]
struct TrainReport {
    model_type: ModelType,
    spec: ModelSpec,
    model_path: PathBuf,
    examples: usize,
    hate: usize,
    not_hate: usize,
    oversample: bool,
    folds: usize,
    cv: Option<EvalReport>,
    grid: Option<GridResult>,
    epoch_loss: Vec<f64>,
}

pub fn train(a: TrainArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let mut spec = resolve_spec(&a, &cfg)?;
    let grid = match (&a.grid, a.default_grid) {
        (Some(p), _) => read_json::<Vec<ModelSpec>>(p, "grid")?,
        (None, true) => feature_grid(&spec)?,
        (None, false) => cfg.model.grid.clone(),
    };
    if grid.iter().any(|g| g.model_type() != spec.model_type()) {
        return Err(usage("--grid mixes model types"));
    }
    let k = a.cv.unwrap_or(cfg.model.cv);
    if k == 1 {
        return Err(usage("--cv must be 0 or at least 2"));
    }
    let labels = need(pick(&a.labels, &cfg.paths.labels), "--labels")?;
    let seed = need_seed(a.seed, &mut cfg, "train")?;
    let oversample = a.oversample || cfg.model.oversample;
    cfg.model = model_settings(spec.clone(), grid.clone(), oversample, k);
    cfg.paths.labels = Some(labels.clone());

    let posts = posts(&a.source, &mut cfg, Some(seed), "train")?;
    let data_set = dataset(&posts, &gold(&labels)?);
    let (hate, not_hate) = data_set.class_counts();
    log::info!("{} examples ({hate} hate, {not_hate} not)", data_set.len());

    let (cv, grid_result) = if k >= 2 && !grid.is_empty() {
        let g = grid_search(&data_set, &grid, k, seed, oversample).map_err(data)?;
        spec = g.best_spec().clone();
        (Some(g.rows[g.best].report.clone()), Some(g))
    } else if k >= 2 {
        (Some(cross_validate(&data_set, &spec, k, seed, oversample).map_err(data)?), None)
    } else {
        (None, None)
    };
    let train_set = if oversample {
        random_oversample(&data_set, derive_seed(seed, FINAL_OVERSAMPLE_STREAM)).map_err(data)?
    } else {
        data_set.clone()
    };
    let (model, log) = train_with_log(&spec, &train_set, seed).map_err(data)?;
    let out = a.out.clone().unwrap_or_else(|| {
        let name = format!("{}.model.json", spec.model_type());
        cfg.paths.models.as_ref().map_or_else(|| PathBuf::from(&name), |d| d.join(&name))
    });
    model.save(&out).map_err(data)?;
    log::info!("model written to {}", out.display());
    let rep = TrainReport {
        model_type: spec.model_type(),
        spec,
        model_path: out,
        examples: data_set.len(),
        hate,
        not_hate,
        oversample,
        folds: k,
        cv,
        grid: grid_result,
        epoch_loss: log.epoch_loss,
    };
    report(a.report.as_deref(), "train", &cfg, rep)
}

fn model_settings(spec: ModelSpec, grid: Vec<ModelSpec>, oversample: bool, cv: usize) -> crate::config::ModelSettings {
    crate::config::ModelSettings { model: Some(spec.model_type()), spec: Some(spec), grid, oversample, cv }
}

fn load_model(path: &Path) -> Result<ModelArtifact, CliError> {
    ModelArtifact::load(path).map_err(data)
}

pub fn evaluate(a: EvaluateArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let labels = need(pick(&a.labels, &cfg.paths.labels), "--labels")?;
    cfg.paths.labels = Some(labels.clone());
    let model = load_model(&a.model)?;
    let posts = posts(&a.source, &mut cfg, a.seed, "evaluate")?;
    let set = dataset(&posts, &gold(&labels)?);
    let gold_pairs: Vec<(String, bool)> = set.examples.iter().map(|e| (e.post_id.clone(), e.label)).collect();
    let predictions: Vec<(String, bool)> =
        set.examples.iter().map(|e| (e.post_id.clone(), model.predict_tokens(&e.tokens).0)).collect();
    let eval = score_predictions(&predictions, &gold_pairs).map_err(data)?;
    #[derive(Serialize)]
    struct Evaluation {
        model: PathBuf,
        model_type: ModelType,
        examples: usize,
        eval: EvalReport,
    }
    let rep = Evaluation { model: a.model.clone(), model_type: model.model_type, examples: set.len(), eval };
    report(a.out.as_deref(), "evaluate", &cfg, rep)
}

fn write_items(out: Option<&Path>, items: &[ReviewItem]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it).map_err(data)?;
        buf.push(b'\n');
    }
    match out {
        Some(p) => std::fs::write(p, buf).map_err(|e| data(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().lock().write_all(&buf).map_err(data),
    }
}

fn read_items(path: &Path) -> Result<Vec<ReviewItem>, CliError> {
    let f = std::fs::File::open(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(data)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| data(format!("{} line {}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}

pub fn predict(a: PredictArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let posts = posts(&a.source, &mut cfg, a.seed, "predict")?;
    let items = infer_batch(&model, &posts).map_err(data)?;
    log::info!("{} of {} posts predicted hate", items.iter().filter(|i| i.model_label == Decision::Yes).count(), items.len());
    write_items(a.out.as_deref(), &items)
}

pub fn sample(a: SampleArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let seed = match a.strategy {
        Strategy::Random => need_seed(a.seed, &mut cfg, "random sampling")?,
        _ => a.seed.or(cfg.seed).unwrap_or(0),
    };
    let items = read_items(&a.items)?;
    let picked = sample_for_review(&items, a.strategy, a.n, seed).map_err(data)?;
    write_items(a.out.as_deref(), &picked)
}

pub fn review_report(a: ReviewReportArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let labels = need(pick(&a.labels, &cfg.paths.labels), "--labels")?;
    cfg.paths.labels = Some(labels.clone());
    let expert = gold(&labels)?;
    let mut items = read_items(&a.items)?;
    for it in &mut items {
        if let Some(&hate) = expert.get(&it.post_id) {
            it.set_expert(if hate { Decision::Yes } else { Decision::No });
        }
    }
    let analysis = disagreement_report(&items).map_err(data)?;
    report(a.out.as_deref(), "review report", &cfg, analysis)
}
