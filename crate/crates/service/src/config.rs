use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use emoprofile_core::{BackendConfig, ScreeningOptions};
use serde::{Deserialize, Serialize};

pub const PORT_ENV: &str = "EMOPROFILE_PORT";
pub const REGISTRY_ENV: &str = "EMOPROFILE_REGISTRY";
pub const SESSION_DIR_ENV: &str = "EMOPROFILE_SESSION_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid value for {var}: {value}")]
    Env { var: &'static str, value: String },
}

/// Service settings, loadable from TOML. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    /// Registry loaded at start-up and rewritten after every accepted swap.
    pub registry: Option<PathBuf>,
    /// Directory for per-session event logs; sessions live in memory only when unset.
    pub session_dir: Option<PathBuf>,
    pub backend: BackendConfig,
    pub screening: ScreeningOptions,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            registry: None,
            session_dir: None,
            backend: BackendConfig::default(),
            screening: ScreeningOptions::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Applies the port, registry, session-directory and backend-endpoint
    /// environment overrides.
    pub fn with_env_overrides(self) -> Result<Self, ConfigError> {
        self.with_overrides(|var| std::env::var(var).ok())
    }

    fn with_overrides(mut self, get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        if let Some(port) = get(PORT_ENV) {
            let port = port.trim().parse().map_err(|_| ConfigError::Env {
                var: PORT_ENV,
                value: port.clone(),
            })?;
            self.bind.set_port(port);
        }
        if let Some(path) = get(REGISTRY_ENV) {
            self.registry = Some(path.into());
        }
        if let Some(dir) = get(SESSION_DIR_ENV) {
            self.session_dir = Some(dir.into());
        }
        self.backend = self.backend.with_env_overrides();
        Ok(self)
    }
}
