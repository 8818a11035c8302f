use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable naming the directory that holds workspace logs.
pub const WORKSPACE_DIR_ENV: &str = "GM_WORKSPACE_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid workspace id `{0}`: use letters, digits, `-` or `_`")]
    InvalidWorkspaceId(String),
    #[error("user table is empty")]
    NoUsers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Static user table: user id to shared secret.
    pub users: BTreeMap<String, String>,
    /// Workspaces served even when no log exists for them yet.
    pub workspaces: Vec<String>,
    pub token_ttl_s: u64,
    pub review_lock_ttl_s: u64,
    /// Without a directory the service keeps everything in memory.
    pub workspace_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            users: BTreeMap::from([("mapper".to_string(), "mapper".to_string())]),
            workspaces: vec!["demo".to_string()],
            token_ttl_s: 3600,
            review_lock_ttl_s: 300,
            workspace_dir: None,
        }
    }
}

pub fn valid_workspace_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl ServiceConfig {
    /// Applies `GM_WORKSPACE_DIR` when set.
    pub fn with_env(mut self) -> Self {
        if let Some(dir) = std::env::var_os(WORKSPACE_DIR_ENV) {
            if !dir.is_empty() {
                self.workspace_dir = Some(PathBuf::from(dir));
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.users.is_empty() {
            return Err(ConfigError::NoUsers);
        }
        if let Some(bad) = self.workspaces.iter().find(|w| !valid_workspace_id(w)) {
            return Err(ConfigError::InvalidWorkspaceId(bad.clone()));
        }
        Ok(())
    }
}
