use std::collections::{BTreeMap, HashSet};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use hatelab_core::annotation::{
    characteristics_distribution, cohen_kappa_decisions, final_labels, percent_agreement_decisions, Decision,
    LabelRecord, LabelStore,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::auth::{Login, SessionToken};
use crate::{ApiError, AppState, Caller, Role};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/login", post(login))
        .route("/api/me/batch", get(batch))
        .route("/api/labels", post(submit_label))
        .route("/api/pairs/me/agreement", get(agreement))
        .route("/api/adjudications", post(adjudicate))
        .route("/api/disagreements", get(disagreements))
        .route("/api/stats/characteristics", get(stats))
        .route("/api/characteristics", get(characteristics))
        .with_state(state)
}

fn body<T>(r: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    r.map(|Json(t)| t).map_err(|e| ApiError::new(e.status(), e.body_text()))
}

fn query<T>(r: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    r.map(|Query(t)| t).map_err(|e| ApiError::new(e.status(), e.body_text()))
}

fn decision(s: &str) -> Result<Decision, ApiError> {
    s.parse().map_err(|e: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))
}

fn not_found(m: impl Into<String>) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, m)
}

fn labeled(store: &LabelStore, who: &str, batch: &[String]) -> usize {
    batch.iter().filter(|p| store.get(p, who).is_some()).count()
}

impl AppState {
    /// Both members of `pair` have labelled every post of paired `round` (from 1).
    fn round_complete(&self, store: &LabelStore, pair: usize, round: u32) -> bool {
        let plan = &self.inner.plan;
        let (a, b) = &plan.pairs[pair];
        match plan.rounds[pair].get(round as usize - 1) {
            Some(batch) => labeled(store, a, batch) == batch.len() && labeled(store, b, batch) == batch.len(),
            None => false,
        }
    }

    /// Posts in paired rounds that are still blinded.
    fn hidden_posts(&self, store: &LabelStore) -> HashSet<&str> {
        let plan = &self.inner.plan;
        let mut out = HashSet::new();
        for (p, rounds) in plan.rounds.iter().enumerate() {
            for (r, batch) in rounds.iter().enumerate() {
                if !self.round_complete(store, p, r as u32 + 1) {
                    out.extend(batch.iter().map(String::as_str));
                }
            }
        }
        out
    }

    /// Paired rounds first, then the solo list.
    fn rounds_of(&self, who: &str) -> Vec<u32> {
        let plan = &self.inner.plan;
        let mut out: Vec<u32> = match plan.pair_index(who) {
            Some(p) => (1..=plan.rounds[p].len() as u32).collect(),
            None => Vec::new(),
        };
        if plan.batch_for(who, 0).is_some() {
            out.push(0);
        }
        out
    }
}

async fn login(State(s): State<AppState>, req: Result<Json<Login>, JsonRejection>) -> Result<Json<SessionToken>, ApiError> {
    let req = body(req)?;
    s.login(&req).map(Json)
}

#[derive(Debug, Deserialize)]
struct RoundQuery {
    round: Option<u32>,
}

#[derive(Debug, Serialize)]
struct BatchPost {
    post_id: String,
    text: Option<String>,
    url: Option<String>,
}

#[derive(Debug, Serialize)]
struct BatchView {
    /// None once every assigned post is labelled.
    round: Option<u32>,
    total: usize,
    labeled: usize,
    posts: Vec<BatchPost>,
}

async fn batch(
    State(s): State<AppState>,
    caller: Caller,
    q: Result<Query<RoundQuery>, QueryRejection>,
) -> Result<Json<BatchView>, ApiError> {
    caller.require(Role::Annotator)?;
    let q = query(q)?;
    let me = caller.annotator_id.as_str();
    let plan = &s.inner.plan;
    let store = s.read();
    let round = match q.round {
        Some(r) => {
            plan.batch_for(me, r).ok_or_else(|| not_found(format!("no batch for round {r}")))?;
            Some(r)
        }
        None => s.rounds_of(me).into_iter().find(|&r| {
            let b = plan.batch_for(me, r).expect("listed round");
            labeled(&store, me, b) < b.len()
        }),
    };
    let Some(round) = round else {
        return Ok(Json(BatchView { round: None, total: 0, labeled: 0, posts: Vec::new() }));
    };
    let posts = plan.batch_for(me, round).expect("checked above");
    let open: Vec<BatchPost> = posts
        .iter()
        .filter(|p| store.get(p, me).is_none())
        .map(|p| {
            let info = s.post(p);
            BatchPost { post_id: p.clone(), text: info.text, url: info.url }
        })
        .collect();
    Ok(Json(BatchView { round: Some(round), total: posts.len(), labeled: posts.len() - open.len(), posts: open }))
}

#[derive(Debug, Deserialize)]
struct LabelBody {
    post_id: String,
    decision: String,
    #[serde(default)]
    characteristics: Vec<String>,
}

async fn submit_label(
    State(s): State<AppState>,
    caller: Caller,
    req: Result<Json<LabelBody>, JsonRejection>,
) -> Result<Json<LabelRecord>, ApiError> {
    caller.require(Role::Annotator)?;
    let req = body(req)?;
    let me = caller.annotator_id.as_str();
    let plan = &s.inner.plan;
    let round = plan.round_of(me, &req.post_id).ok_or_else(|| not_found(format!("post {} is not in your batches", req.post_id)))?;
    let d = decision(&req.decision)?;
    s.inner.characteristics.validate(d, &req.characteristics)?;
    let mut store = s.write();
    if round > 0 && store.get(&req.post_id, me).is_some() {
        let pair = plan.pair_index(me).expect("paired round");
        if s.round_complete(&store, pair, round) {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("round {round} is closed; labels are final")));
        }
    }
    let record = LabelRecord {
        post_id: req.post_id,
        annotator_id: me.to_string(),
        round,
        decision: d,
        characteristics: req.characteristics,
        timestamp: s.now(),
    };
    store.submit(record.clone())?;
    Ok(Json(record))
}

#[derive(Debug, Deserialize)]
struct AgreementQuery {
    round: u32,
}

#[derive(Debug, Serialize)]
struct Disagreement {
    post_id: String,
    text: Option<String>,
    url: Option<String>,
    mine: Decision,
    partner: Decision,
    mine_characteristics: Vec<String>,
    partner_characteristics: Vec<String>,
}

#[derive(Debug, Serialize)]
struct AgreementView {
    round: u32,
    partner: String,
    total: usize,
    agreement: f64,
    kappa: f64,
    disagreements: Vec<Disagreement>,
}

async fn agreement(
    State(s): State<AppState>,
    caller: Caller,
    q: Result<Query<AgreementQuery>, QueryRejection>,
) -> Result<Json<AgreementView>, ApiError> {
    caller.require(Role::Annotator)?;
    let round = query(q)?.round;
    let me = caller.annotator_id.as_str();
    let plan = &s.inner.plan;
    let pair = plan.pair_index(me).ok_or_else(|| not_found("you are not in a pair"))?;
    let partner = plan.partner(me).expect("paired");
    let batch = (round > 0)
        .then(|| plan.rounds[pair].get(round as usize - 1))
        .flatten()
        .ok_or_else(|| not_found(format!("no paired round {round}")))?;
    let store = s.read();
    if !s.round_complete(&store, pair, round) {
        // own progress only; the partner's stays hidden
        return Err(ApiError::new(StatusCode::CONFLICT, "round not complete for both annotators")
            .with(json!({ "round": round, "labeled": labeled(&store, me, batch), "total": batch.len() })));
    }
    let mut mine = Vec::with_capacity(batch.len());
    let mut theirs = Vec::with_capacity(batch.len());
    let mut disagreements = Vec::new();
    for p in batch {
        let (a, b) = (store.get(p, me).expect("complete"), store.get(p, partner).expect("complete"));
        mine.push(a.decision);
        theirs.push(b.decision);
        if a.decision != b.decision {
            let info = s.post(p);
            disagreements.push(Disagreement {
                post_id: p.clone(),
                text: info.text,
                url: info.url,
                mine: a.decision,
                partner: b.decision,
                mine_characteristics: a.characteristics.clone(),
                partner_characteristics: b.characteristics.clone(),
            });
        }
    }
    Ok(Json(AgreementView {
        round,
        partner: partner.to_string(),
        total: batch.len(),
        agreement: percent_agreement_decisions(&mine, &theirs)?,
        kappa: cohen_kappa_decisions(&mine, &theirs)?,
        disagreements,
    }))
}

#[derive(Debug, Deserialize)]
struct AdjudicationBody {
    post_id: String,
    decision: String,
}

#[derive(Debug, Serialize)]
struct AdjudicationView {
    post_id: String,
    decision: Decision,
    facilitator_id: String,
    timestamp: chrono::DateTime<chrono::Utc>,
}

async fn adjudicate(
    State(s): State<AppState>,
    caller: Caller,
    req: Result<Json<AdjudicationBody>, JsonRejection>,
) -> Result<Json<AdjudicationView>, ApiError> {
    caller.require(Role::Facilitator)?;
    let req = body(req)?;
    if !s.inner.plan.all_posts().contains(req.post_id.as_str()) {
        return Err(not_found(format!("unknown post {}", req.post_id)));
    }
    let d = decision(&req.decision)?;
    let mut store = s.write();
    if s.hidden_posts(&store).contains(req.post_id.as_str()) {
        return Err(ApiError::new(StatusCode::CONFLICT, "the pair has not finished this round"));
    }
    let at = s.now();
    store.adjudicate(&req.post_id, d, &caller.annotator_id, at)?;
    Ok(Json(AdjudicationView { post_id: req.post_id, decision: d, facilitator_id: caller.annotator_id, timestamp: at }))
}

#[derive(Debug, Serialize)]
struct OpenCase {
    post_id: String,
    round: u32,
    text: Option<String>,
    url: Option<String>,
    labels: BTreeMap<String, Decision>,
    adjudicated: Option<Decision>,
}

/// Paired posts with split decisions in finished rounds, for the facilitator call.
async fn disagreements(State(s): State<AppState>, caller: Caller) -> Result<Json<Vec<OpenCase>>, ApiError> {
    caller.require(Role::Facilitator)?;
    let plan = &s.inner.plan;
    let store = s.read();
    let adjudicated = store.adjudications();
    let mut out = Vec::new();
    for (p, (a, b)) in plan.pairs.iter().enumerate() {
        for (r, batch) in plan.rounds[p].iter().enumerate() {
            if !s.round_complete(&store, p, r as u32 + 1) {
                continue;
            }
            for post in batch {
                let (la, lb) = (store.get(post, a).expect("complete"), store.get(post, b).expect("complete"));
                if la.decision != lb.decision {
                    let info = s.post(post);
                    out.push(OpenCase {
                        post_id: post.clone(),
                        round: r as u32 + 1,
                        text: info.text,
                        url: info.url,
                        labels: [(a.clone(), la.decision), (b.clone(), lb.decision)].into(),
                        adjudicated: adjudicated.get(post).copied(),
                    });
                }
            }
        }
    }
    Ok(Json(out))
}

#[derive(Debug, Serialize)]
struct Bin {
    characteristic: String,
    count: usize,
}

#[derive(Debug, Serialize)]
struct Histogram {
    yes_posts: usize,
    histogram: Vec<Bin>,
}

/// Over final labels, leaving out posts from rounds still blinded.
async fn stats(State(s): State<AppState>, _caller: Caller) -> Json<Histogram> {
    let store = s.read();
    let hidden = s.hidden_posts(&store);
    let visible: Vec<LabelRecord> =
        store.records().iter().filter(|r| !hidden.contains(r.post_id.as_str())).cloned().collect();
    let finals = final_labels(&visible, &store.adjudications());
    let yes_posts = finals.iter().filter(|f| f.decision == Some(Decision::Yes)).count();
    let mut histogram: Vec<Bin> = characteristics_distribution(&finals)
        .into_iter()
        .map(|(characteristic, count)| Bin { characteristic, count })
        .collect();
    let mut zero: Vec<&String> =
        s.inner.characteristics.names.iter().filter(|n| !histogram.iter().any(|b| &b.characteristic == *n)).collect();
    zero.sort();
    histogram.extend(zero.into_iter().map(|c| Bin { characteristic: c.clone(), count: 0 }));
    Json(Histogram { yes_posts, histogram })
}

async fn characteristics(State(s): State<AppState>, _caller: Caller) -> Json<serde_json::Value> {
    Json(json!({ "characteristics": s.inner.characteristics.names }))
}
