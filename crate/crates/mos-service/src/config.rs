use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const DEFAULT_NATURALNESS: &str = "A sample is natural when it sounds like it was produced by a human being. \
Rate how human-like the voice sounds, whether it is speaking or laughing, not whether you like it.";

/// Server settings. Loaded from a TOML file, then overridden by
/// `LAUGHTTS_MOS_*` environment variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// Sample manifest: `sample_id<TAB>method<TAB>wav path` per line.
    pub samples: PathBuf,
    /// Holds `ratings.jsonl` and `sessions.jsonl`.
    pub store_dir: PathBuf,
    pub admin_token: String,
    pub server_seed: u64,
    /// Samples per session; `None` plays the whole set.
    pub max_samples_per_session: Option<usize>,
    pub fsync: bool,
    pub naturalness_explanation: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            samples: PathBuf::from("samples.tsv"),
            store_dir: PathBuf::from("mos-store"),
            admin_token: String::new(),
            server_seed: 0,
            max_samples_per_session: None,
            fsync: true,
            naturalness_explanation: DEFAULT_NATURALNESS.into(),
        }
    }
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Io(path.display().to_string(), e))?;
        toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies `LAUGHTTS_MOS_{BIND,PORT,SAMPLES,STORE_DIR,ADMIN_TOKEN,SERVER_SEED,MAX_SAMPLES}`.
    pub fn apply_env(mut self, get: impl Fn(&str) -> Option<String>) -> Result<Self, ServiceError> {
        let parse_err = |k: &str, v: &str| ServiceError::Config(format!("{k}={v:?} is not a valid value"));
        if let Some(v) = get("LAUGHTTS_MOS_BIND") {
            self.bind = v;
        }
        if let Some(v) = get("LAUGHTTS_MOS_PORT") {
            self.port = v.parse().map_err(|_| parse_err("LAUGHTTS_MOS_PORT", &v))?;
        }
        if let Some(v) = get("LAUGHTTS_MOS_SAMPLES") {
            self.samples = v.into();
        }
        if let Some(v) = get("LAUGHTTS_MOS_STORE_DIR") {
            self.store_dir = v.into();
        }
        if let Some(v) = get("LAUGHTTS_MOS_ADMIN_TOKEN") {
            self.admin_token = v;
        }
        if let Some(v) = get("LAUGHTTS_MOS_SERVER_SEED") {
            self.server_seed = v.parse().map_err(|_| parse_err("LAUGHTTS_MOS_SERVER_SEED", &v))?;
        }
        if let Some(v) = get("LAUGHTTS_MOS_MAX_SAMPLES") {
            self.max_samples_per_session = Some(v.parse().map_err(|_| parse_err("LAUGHTTS_MOS_MAX_SAMPLES", &v))?);
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.admin_token.len() < 8 {
            return Err(ServiceError::Config("admin_token must be at least 8 characters".into()));
        }
        if self.max_samples_per_session == Some(0) {
            return Err(ServiceError::Config("max_samples_per_session must be positive".into()));
        }
        Ok(())
    }
}
