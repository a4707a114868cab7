//! JSON API over the label store for live paired annotation.
//!
//! Annotators log in with a passcode, pull their batch, and submit labels.
//! A pair's agreement for a round unlocks only once both members have
//! labelled every post in it, so neither sees the other's decisions early.

mod auth;
pub mod config;
mod routes;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::{DateTime, Duration, SubsecRound, Utc};
use hatelab_core::annotation::{AnnotationError, AssignmentPlan, Characteristics, LabelStore};
use hatelab_core::corpus::CleanPost;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use auth::{Caller, SessionToken};
pub use config::{Account, Role, ServerConfig};
pub use routes::router;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Error body is always `{"error": ...}` plus optional extra fields.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub extra: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into(), extra: None }
    }

    fn with(mut self, extra: Value) -> Self {
        self.extra = Some(extra);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let (Some(Value::Object(extra)), Value::Object(map)) = (self.extra, &mut body) {
            map.extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let status = match e {
            AnnotationError::InvalidLabel(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{e}");
        }
        ApiError::new(status, e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PostInfo {
    pub text: Option<String>,
    pub url: Option<String>,
}

type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Debug, Clone)]
pub(crate) struct Session {
    pub annotator_id: String,
    pub role: Role,
    pub expiry: DateTime<Utc>,
}

pub(crate) struct Inner {
    pub plan: AssignmentPlan,
    pub posts: HashMap<String, PostInfo>,
    pub accounts: HashMap<String, Account>,
    pub characteristics: Characteristics,
    pub ttl: Duration,
    pub sessions: Mutex<HashMap<String, Session>>,
    /// Writers serialize on the write lock; readers see a whole-request snapshot.
    pub store: RwLock<LabelStore>,
    pub clock: Clock,
}

#[derive(Clone)]
pub struct AppState {
    pub(crate) inner: Arc<Inner>,
}

impl AppState {
    pub fn new(config: ServerConfig, plan: AssignmentPlan, store: LabelStore) -> Result<Self, ServerError> {
        config.validate()?;
        for a in plan.annotators() {
            if !config.accounts.iter().any(|acc| acc.annotator_id == a) {
                log::warn!("annotator {a} has no account and cannot log in");
            }
        }
        let characteristics = config.characteristics.clone().map(Characteristics::new).unwrap_or_default();
        let accounts = config.accounts.into_iter().map(|a| (a.annotator_id.clone(), a)).collect();
        Ok(AppState {
            inner: Arc::new(Inner {
                plan,
                posts: HashMap::new(),
                accounts,
                characteristics,
                ttl: Duration::seconds(config.token_ttl_secs),
                sessions: Mutex::new(HashMap::new()),
                store: RwLock::new(store),
                clock: Arc::new(Utc::now),
            }),
        })
    }

    fn inner_mut(&mut self) -> &mut Inner {
        Arc::get_mut(&mut self.inner).expect("configure before cloning the state")
    }

    /// Attaches post text and links shown in batches.
    pub fn with_posts(mut self, posts: impl IntoIterator<Item = CleanPost>) -> Self {
        let map = &mut self.inner_mut().posts;
        for p in posts {
            map.insert(p.post_id, PostInfo { text: Some(p.text), url: p.url });
        }
        self
    }

    pub fn with_clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.inner_mut().clock = Arc::new(clock);
        self
    }

    /// Whole seconds, matching what the labels file keeps.
    pub(crate) fn now(&self) -> DateTime<Utc> {
        (self.inner.clock)().trunc_subsecs(0)
    }

    pub(crate) fn read(&self) -> RwLockReadGuard<'_, LabelStore> {
        self.inner.store.read().unwrap_or_else(|e| e.into_inner())
    }

    pub(crate) fn write(&self) -> RwLockWriteGuard<'_, LabelStore> {
        self.inner.store.write().unwrap_or_else(|e| e.into_inner())
    }

    pub(crate) fn post(&self, post_id: &str) -> PostInfo {
        self.inner.posts.get(post_id).cloned().unwrap_or(PostInfo { text: None, url: None })
    }
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
