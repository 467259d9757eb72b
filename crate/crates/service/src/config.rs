//! Service configuration: a TOML file, overridden by environment variables.
//!
//! ```toml
//! bind = "127.0.0.1:8080"
//! store = "commons.ndjson"
//! api_key = "change-me"        # optional; omit to disable auth
//! simulation = false           # true: every mutating request must carry `at`
//! tick_interval_ms = 15000     # scheduler cadence in live mode
//!
//! [house_defaults]             # used when POST /houses omits `config`
//! timezone = "America/Los_Angeles"
//! points_per_resident_per_month = 100
//! ```
//!
//! Environment: `COMMONS_CONFIG` (path of the file), `COMMONS_BIND`,
//! `COMMONS_STORE`, `COMMONS_API_KEY`.

use std::path::{Path, PathBuf};

use commons_core::{EngineError, HouseConfig};
use serde::Deserialize;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub store: PathBuf,
    pub api_key: Option<String>,
    pub simulation: bool,
    pub tick_interval_ms: u64,
    pub house_defaults: HouseConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            store: "commons.ndjson".into(),
            api_key: None,
            simulation: false,
            tick_interval_ms: 15_000,
            house_defaults: HouseConfig::default(),
        }
    }
}

impl ServiceConfig {
    /// Parses TOML, reporting the dotted path of the first bad field.
    pub fn from_toml(text: &str) -> Result<Self, EngineError> {
        let de = toml::Deserializer::new(text);
        let cfg: ServiceConfig = serde_path_to_error::deserialize(de).map_err(|e| EngineError::ConfigInvalid {
            path: e.path().to_string(),
            message: e.inner().message().trim().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path).map_err(|e| EngineError::ConfigInvalid {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.tick_interval_ms == 0 || self.tick_interval_ms > 60_000 {
            return Err(EngineError::ConfigInvalid {
                path: "tick_interval_ms".into(),
                message: "must be within 1..=60000 so due proposals resolve at least once a minute".into(),
            });
        }
        self.house_defaults.validate().map_err(|e| match e {
            EngineError::ConfigInvalid { path, message } => EngineError::ConfigInvalid {
                path: format!("house_defaults.{path}"),
                message,
            },
            other => other,
        })
    }

    /// Loads `COMMONS_CONFIG` if set, then applies the other variables.
    pub fn from_env() -> Result<Self, EngineError> {
        let vars = |k: &str| std::env::var(k).ok();
        Self::from_lookup(vars)
    }

    pub fn from_lookup(var: impl Fn(&str) -> Option<String>) -> Result<Self, EngineError> {
        let mut cfg = match var("COMMONS_CONFIG") {
            Some(path) => Self::from_file(Path::new(&path))?,
            None => Self::default(),
        };
        if let Some(bind) = var("COMMONS_BIND") {
            cfg.bind = bind;
        }
        if let Some(store) = var("COMMONS_STORE") {
            cfg.store = store.into();
        }
        if let Some(key) = var("COMMONS_API_KEY") {
            cfg.api_key = Some(key).filter(|k| !k.is_empty());
        }
        Ok(cfg)
    }
}
