use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::Utc;
use hatelab_core::annotation::{
    cohen_kappa_decisions, final_labels, make_assignments, percent_agreement_decisions, read_labels, write_labels,
    AssignmentConfig, AssignmentPlan, Decision, LabelRecord, LabelStore, Resolution,
};
use hatelab_core::corpus::read_jsonl;
use hatelab_server::{AppState, ServerConfig};
use serde::Serialize;

use crate::{
    data, need, need_seed, pick, report, usage, AdjudicateArgs, AgreementArgs, AssignArgs, CliError, RunConfig,
    ServeArgs,
};

pub fn load_plan(path: &Path) -> Result<AssignmentPlan, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| data(format!("plan {}: {e}", path.display())))
}

pub fn assign(a: AssignArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let corpus = need(pick(&a.corpus, &cfg.paths.corpus), "--corpus")?;
    let out = need(pick(&a.out, &cfg.paths.plan), "--out")?;
    let seed = need_seed(a.seed, &mut cfg, "assign")?;
    cfg.assignment.batch_size = a.batch_size.unwrap_or(cfg.assignment.batch_size);
    cfg.assignment.paired_rounds = a.rounds.unwrap_or(cfg.assignment.paired_rounds);
    cfg.paths.corpus = Some(corpus.clone());
    cfg.paths.plan = Some(out.clone());
    let ids: Vec<String> = read_jsonl(&corpus).map_err(data)?.into_iter().map(|p| p.post_id).collect();
    let ac = AssignmentConfig { batch_size: cfg.assignment.batch_size, paired_rounds: cfg.assignment.paired_rounds, seed };
    let plan = make_assignments(&a.annotators, &ids, &ac).map_err(data)?;
    std::fs::write(&out, plan.to_json()).map_err(|e| data(format!("cannot write {}: {e}", out.display())))?;
    #[derive(Serialize)]
    struct Summary<'a> {
        pairs: &'a [(String, String)],
        paired_posts: usize,
        solo: BTreeMap<&'a str, usize>,
        posts: usize,
    }
    let summary = Summary {
        pairs: &plan.pairs,
        paired_posts: plan.rounds.iter().flatten().map(Vec::len).sum(),
        solo: plan.solo.iter().map(|s| (s.annotator.as_str(), s.posts.len())).collect(),
        posts: plan.all_posts().len(),
    };
    report(a.report.as_deref(), "assign", &cfg, summary)
}

#[derive(Debug, Serialize)]
struct PairStats {
    pair: (String, String),
    n: usize,
    /// None until both have labelled the whole batch.
    agreement: Option<f64>,
    kappa: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RoundStats {
    round: u32,
    pairs: Vec<PairStats>,
    average: Option<f64>,
}

fn stats(pair: (String, String), da: &[Decision], db: &[Decision], complete: bool) -> PairStats {
    let done = complete && !da.is_empty();
    PairStats {
        n: da.len(),
        agreement: done.then(|| percent_agreement_decisions(da, db).expect("equal lengths")),
        kappa: done.then(|| cohen_kappa_decisions(da, db).expect("equal lengths")),
        pair,
    }
}

fn round_stats(round: u32, pairs: Vec<PairStats>) -> RoundStats {
    let done: Vec<f64> = pairs.iter().filter_map(|p| p.agreement).collect();
    let average = (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64);
    RoundStats { round, pairs, average }
}

/// Batches and pairs from the plan; a pair's round counts once both finish it.
fn from_plan(plan: &AssignmentPlan, latest: &HashMap<(&str, &str), Decision>, round: u32) -> RoundStats {
    let pairs = plan
        .pairs
        .iter()
        .enumerate()
        .filter_map(|(p, (a, b))| {
            let batch = plan.rounds[p].get(round as usize - 1)?;
            let mut da = Vec::new();
            let mut db = Vec::new();
            for post in batch {
                if let (Some(&x), Some(&y)) = (latest.get(&(a.as_str(), post.as_str())), latest.get(&(b.as_str(), post.as_str()))) {
                    da.push(x);
                    db.push(y);
                }
            }
            let complete = da.len() == batch.len();
            Some(stats((a.clone(), b.clone()), &da, &db, complete))
        })
        .collect();
    round_stats(round, pairs)
}

/// Without a plan: posts labelled by exactly two annotators in `round` define the pairs.
fn inferred(records: &[LabelRecord], round: u32) -> RoundStats {
    let mut by_post: BTreeMap<&str, BTreeMap<&str, Decision>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.round == round) {
        by_post.entry(&r.post_id).or_default().insert(&r.annotator_id, r.decision);
    }
    let mut pairs: BTreeMap<(&str, &str), (Vec<Decision>, Vec<Decision>)> = BTreeMap::new();
    for (post, labels) in by_post {
        if labels.len() != 2 {
            if labels.len() > 2 {
                log::warn!("post {post} has {} annotators in round {round}; skipped", labels.len());
            }
            continue;
        }
        let mut it = labels.into_iter();
        let ((a, x), (b, y)) = (it.next().unwrap(), it.next().unwrap());
        let e = pairs.entry((a, b)).or_default();
        e.0.push(x);
        e.1.push(y);
    }
    let pairs = pairs
        .into_iter()
        .map(|((a, b), (da, db))| stats((a.to_string(), b.to_string()), &da, &db, true))
        .collect();
    round_stats(round, pairs)
}

pub fn agreement(a: AgreementArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let labels = need(pick(&a.labels, &cfg.paths.labels), "--labels")?;
    let plan_path = pick(&a.plan, &cfg.paths.plan);
    cfg.paths.labels = Some(labels.clone());
    cfg.paths.plan.clone_from(&plan_path);
    let records = read_labels(&labels).map_err(data)?;
    let plan = plan_path.as_deref().map(load_plan).transpose()?;
    let rounds: Vec<u32> = match (a.round, &plan) {
        (Some(0), _) => return Err(usage("--round must be a paired round (1 or more)")),
        (Some(r), _) => vec![r],
        (None, Some(p)) => (1..=p.n_rounds() as u32).collect(),
        (None, None) => records.iter().map(|r| r.round).filter(|&r| r > 0).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let latest: HashMap<(&str, &str), Decision> =
        records.iter().map(|r| ((r.annotator_id.as_str(), r.post_id.as_str()), r.decision)).collect();
    let mut out: Vec<RoundStats> = rounds
        .iter()
        .map(|&r| match &plan {
            Some(p) => from_plan(p, &latest, r),
            None => inferred(&records, r),
        })
        .collect();
    if a.round.is_some() {
        report(a.out.as_deref(), "agreement", &cfg, out.pop().expect("one round"))
    } else {
        report(a.out.as_deref(), "agreement", &cfg, out)
    }
}

fn parse_decision(s: &str) -> Result<(String, Decision), CliError> {
    let (post, d) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("--decide expects POST=DECISION, got {s:?}")))?;
    let d = d.parse().map_err(|e| usage(format!("--decide {s}: {e}")))?;
    Ok((post.trim().to_string(), d))
}

/// One row per resolved post, marked as annotator `adjudicated`, stamped with
/// the latest contributing label's time.
fn final_rows(records: &[LabelRecord], adjudications: &BTreeMap<String, Decision>) -> (Vec<LabelRecord>, Vec<String>, BTreeMap<Resolution, usize>) {
    let mut latest: HashMap<&str, &LabelRecord> = HashMap::new();
    for r in records {
        let e = latest.entry(r.post_id.as_str()).or_insert(r);
        if (r.timestamp, r.round) > (e.timestamp, e.round) {
            *e = r;
        }
    }
    let mut rows = Vec::new();
    let mut pending = Vec::new();
    let mut counts = BTreeMap::new();
    for f in final_labels(records, adjudications) {
        *counts.entry(f.resolution).or_insert(0) += 1;
        match f.decision {
            Some(decision) => {
                let last = latest[f.post_id.as_str()];
                rows.push(LabelRecord {
                    annotator_id: "adjudicated".into(),
                    round: last.round,
                    decision,
                    characteristics: f.characteristics,
                    timestamp: last.timestamp,
                    post_id: f.post_id,
                });
            }
            None => pending.push(f.post_id),
        }
    }
    (rows, pending, counts)
}

pub fn adjudicate(a: AdjudicateArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let labels = need(pick(&a.labels, &cfg.paths.labels), "--labels")?;
    cfg.paths.labels = Some(labels.clone());
    let decisions = a.decisions.iter().map(|s| parse_decision(s)).collect::<Result<Vec<_>, _>>()?;
    if !decisions.is_empty() && a.facilitator.is_none() {
        return Err(usage("--facilitator is required with --decide"));
    }
    if !labels.exists() {
        return Err(data(format!("labels file {} not found", labels.display())));
    }
    let mut store = LabelStore::open(&labels).map_err(data)?;
    for (post, d) in &decisions {
        if !store.records().iter().any(|r| &r.post_id == post) {
            return Err(data(format!("no labels for post {post}")));
        }
        store.adjudicate(post, *d, a.facilitator.as_deref().expect("checked"), Utc::now()).map_err(data)?;
    }
    let (rows, pending, counts) = final_rows(store.records(), &store.adjudications());
    if let Some(out) = &a.out {
        write_labels(out, &rows).map_err(data)?;
    }
    if !pending.is_empty() {
        log::warn!("{} posts still need a facilitator decision", pending.len());
    }
    #[derive(Serialize)]
    struct Summary {
        resolved: usize,
        pending: Vec<String>,
        by_resolution: BTreeMap<Resolution, usize>,
    }
    report(a.report.as_deref(), "adjudicate", &cfg, Summary { resolved: rows.len(), pending, by_resolution: counts })
}

pub fn serve(a: ServeArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let labels = need(pick(&a.labels, &cfg.paths.labels), "--labels")?;
    let plan_path = need(pick(&a.plan, &cfg.paths.plan), "--plan")?;
    let accounts = need(pick(&a.accounts, &cfg.paths.accounts), "--accounts")?;
    let corpus = pick(&a.corpus, &cfg.paths.corpus);
    cfg.paths.labels = Some(labels.clone());
    let plan = load_plan(&plan_path)?;
    let server_cfg = ServerConfig::load(&accounts).map_err(data)?;
    let store = LabelStore::open(&labels).map_err(data)?;
    let mut state = AppState::new(server_cfg, plan, store).map_err(data)?;
    if let Some(c) = &corpus {
        state = state.with_posts(read_jsonl(c).map_err(data)?);
    } else {
        log::warn!("no --corpus given; batches will carry post ids only");
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_io().build().map_err(data)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .map_err(|e| data(format!("cannot bind {}:{}: {e}", a.host, a.port)))?;
        hatelab_server::serve(listener, state).await.map_err(data)
    })
}
