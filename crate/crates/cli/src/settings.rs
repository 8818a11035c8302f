//! `gm.toml`: pipeline defaults, the service user table and replay defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use gm_core::config::PipelineConfig;
use gm_service::ServiceConfig;

use crate::failure::{Failure, ResultExt};

pub const DEFAULT_CONFIG_FILE: &str = "gm.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayDefaults {
    pub server: String,
    pub workspace: String,
    pub user: String,
    pub secret: String,
}

impl Default for ReplayDefaults {
    fn default() -> Self {
        Self {
            server: "http://127.0.0.1:8080".into(),
            workspace: "demo".into(),
            user: "mapper".into(),
            secret: "mapper".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub service: ServiceConfig,
    pub replay: ReplayDefaults,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let s: Settings = toml::from_str(text).input("invalid configuration")?;
        s.pipeline.validate().input("invalid [pipeline] table")?;
        s.service.validate().input("invalid [service] table")?;
        Ok(s)
    }

    /// An explicit path must exist; otherwise `./gm.toml` is used when present.
    pub fn load(explicit: Option<&Path>) -> Result<Self, Failure> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let p = Path::new(DEFAULT_CONFIG_FILE);
                if !p.exists() {
                    return Ok(Self::default());
                }
                p.to_path_buf()
            }
        };
        let text =
            std::fs::read_to_string(&path).input(&format!("cannot read {}", path.display()))?;
        Self::parse(&text).map_err(|f| match f {
            Failure::Input(e) => Failure::Input(e.context(path.display().to_string())),
            other => other,
        })
    }
}
