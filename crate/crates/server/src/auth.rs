use axum::extract::FromRequestParts;
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use axum::http::StatusCode;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::{ApiError, AppState, Role, Session};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionToken {
    pub annotator_id: String,
    pub token: String,
    pub expiry: DateTime<Utc>,
    pub role: Role,
}

#[derive(Debug, Deserialize)]
pub(crate) struct Login {
    pub annotator_id: String,
    pub passcode: String,
}

fn fresh_token() -> String {
    let bytes: [u8; 24] = rand::random();
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn same(a: &str, b: &str) -> bool {
    a.len() == b.len() && a.bytes().zip(b.bytes()).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

impl AppState {
    pub(crate) fn login(&self, req: &Login) -> Result<SessionToken, ApiError> {
        let account = self
            .inner
            .accounts
            .get(&req.annotator_id)
            .filter(|a| same(&a.passcode, &req.passcode))
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unknown annotator or wrong passcode"))?;
        let now = self.now();
        let token = fresh_token();
        let expiry = now + self.inner.ttl;
        let mut sessions = self.inner.sessions.lock().unwrap_or_else(|e| e.into_inner());
        sessions.retain(|_, s| s.expiry > now);
        sessions.insert(
            token.clone(),
            Session { annotator_id: account.annotator_id.clone(), role: account.role, expiry },
        );
        Ok(SessionToken { annotator_id: account.annotator_id.clone(), token, expiry, role: account.role })
    }
}

/// The authenticated annotator behind a request's bearer token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caller {
    pub annotator_id: String,
    pub role: Role,
}

impl Caller {
    pub(crate) fn require(&self, role: Role) -> Result<(), ApiError> {
        if self.role == role {
            Ok(())
        } else {
            Err(ApiError::new(StatusCode::FORBIDDEN, format!("requires the {role:?} role").to_lowercase()))
        }
    }
}

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let unauthorized = |m: &str| ApiError::new(StatusCode::UNAUTHORIZED, m);
        let header = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| unauthorized("missing bearer token"))?;
        let token = header.strip_prefix("Bearer ").map(str::trim).ok_or_else(|| unauthorized("missing bearer token"))?;
        let now = state.now();
        let mut sessions = state.inner.sessions.lock().unwrap_or_else(|e| e.into_inner());
        match sessions.get(token) {
            Some(s) if s.expiry > now => Ok(Caller { annotator_id: s.annotator_id.clone(), role: s.role }),
            Some(_) => {
                sessions.remove(token);
                Err(unauthorized("token expired"))
            }
            None => Err(unauthorized("invalid token")),
        }
    }
}
