//! Service configuration: a TOML file, overridden by command-line flags.
//!
//! ```toml
//! port = 8787
//! data_dir = "var/intentflow"
//! provider_mode = "replay"      # remote | replay | record | scripted
//! fixtures = "data/fixtures/walkthrough"
//! baseline = false
//! snapshot_every = 50
//!
//! [provider]
//! endpoint = "https://api.openai.com/v1"
//! api_key_env = "INTENTFLOW_API_KEY"
//! max_in_flight = 8
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use intentflow_core::gateway::{FixtureProvider, RemoteProvider, ScriptedProvider};
use intentflow_core::{GatewayError, Provider, ProviderConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    Remote,
    Replay,
    Record,
    /// Rule-based responses from a script file (`fixtures` names the file).
    Scripted,
}

impl FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "remote" => Ok(ProviderMode::Remote),
            "replay" => Ok(ProviderMode::Replay),
            "record" => Ok(ProviderMode::Record),
            "scripted" => Ok(ProviderMode::Scripted),
            other => Err(format!("unknown provider mode {other:?}; expected remote, replay, record, or scripted")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    pub provider_mode: ProviderMode,
    pub fixtures: Option<PathBuf>,
    /// Disables the intent, dimension, and linking stages.
    pub baseline: bool,
    /// Log records between snapshots; 0 disables snapshots.
    pub snapshot_every: u64,
    pub provider: ProviderConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8787,
            data_dir: PathBuf::from("intentflow-data"),
            provider_mode: ProviderMode::Remote,
            fixtures: None,
            baseline: false,
            snapshot_every: 50,
            provider: ProviderConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Provider(#[from] GatewayError),
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text).map_err(|message| ConfigError::Parse { path: path.to_path_buf(), message })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.provider.validate().map_err(ConfigError::Invalid)?;
        if self.provider_mode != ProviderMode::Remote && self.fixtures.is_none() {
            return Err(ConfigError::Invalid(format!("provider mode {:?} needs a fixtures path", self.provider_mode)));
        }
        Ok(())
    }

    /// The provider this configuration selects.
    pub fn build_provider(&self) -> Result<Arc<dyn Provider>, ConfigError> {
        self.validate()?;
        let fixtures = || self.fixtures.clone().expect("validated");
        Ok(match self.provider_mode {
            ProviderMode::Remote => Arc::new(RemoteProvider::from_config(&self.provider)?),
            ProviderMode::Replay => Arc::new(FixtureProvider::replay(fixtures())?),
            ProviderMode::Record => {
                let upstream = Arc::new(RemoteProvider::from_config(&self.provider)?);
                Arc::new(FixtureProvider::record(fixtures(), upstream)?)
            }
            ProviderMode::Scripted => {
                let path = fixtures();
                let text = std::fs::read_to_string(&path)
                    .map_err(|source| ConfigError::Read { path: path.clone(), source })?;
                let script: ScriptedProvider = serde_json::from_str(&text)
                    .map_err(|e| ConfigError::Parse { path, message: e.to_string() })?;
                Arc::new(script)
            }
        })
    }
}
