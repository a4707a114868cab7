use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ServerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Annotator,
    Facilitator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub annotator_id: String,
    pub passcode: String,
    #[serde(default = "annotator")]
    pub role: Role,
}

fn annotator() -> Role {
    Role::Annotator
}

fn twelve_hours() -> i64 {
    12 * 3600
}

/// Static accounts file. Passcodes live here and nowhere else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerConfig {
    pub accounts: Vec<Account>,
    #[serde(default = "twelve_hours")]
    pub token_ttl_secs: i64,
    /// Overrides the default characteristics list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characteristics: Option<Vec<String>>,
}

impl ServerConfig {
    pub fn new(accounts: Vec<Account>) -> Self {
        ServerConfig { accounts, token_ttl_secs: twelve_hours(), characteristics: None }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServerError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ServerConfig = serde_json::from_str(&text)
            .map_err(|e| ServerError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        if self.token_ttl_secs <= 0 {
            return Err(ServerError::Config("token_ttl_secs must be positive".into()));
        }
        let mut seen = HashSet::new();
        for a in &self.accounts {
            if a.passcode.is_empty() {
                return Err(ServerError::Config(format!("empty passcode for {}", a.annotator_id)));
            }
            if !seen.insert(a.annotator_id.as_str()) {
                return Err(ServerError::Config(format!("duplicate account {}", a.annotator_id)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn role_defaults_to_annotator() {
        let cfg: ServerConfig =
            serde_json::from_str(r#"{"accounts":[{"annotator_id":"a","passcode":"x"}]}"#).unwrap();
        assert_eq!(cfg.accounts[0].role, Role::Annotator);
        assert_eq!(cfg.token_ttl_secs, 43200);
    }

    #[test]
    fn rejects_duplicates_and_blank_passcodes() {
        let acc = |id: &str, p: &str| Account { annotator_id: id.into(), passcode: p.into(), role: Role::Annotator };
        assert!(ServerConfig::new(vec![acc("a", "1"), acc("a", "2")]).validate().is_err());
        assert!(ServerConfig::new(vec![acc("a", "")]).validate().is_err());
        assert!(ServerConfig::new(vec![acc("a", "1"), acc("b", "2")]).validate().is_ok());
    }
}
