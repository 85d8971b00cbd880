//! Access to completion providers.
//!
//! Every pipeline module call goes through [`Gateway::complete_structured`]:
//! the module's template is rendered, the request is sent to a [`Provider`],
//! and the reply is parsed and checked against the module's response schema.
//! Failed parses are retried with the validator's complaint appended to the
//! conversation.

mod fixture;
mod remote;
pub mod schema;
mod scripted;
mod synthetic;
mod template;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fixture::{FixtureEntry, FixtureMode, FixtureProvider, FIXTURE_SCHEMA};
pub use remote::RemoteProvider;
pub use schema::ValidationMode;
pub use scripted::{ScriptRule, ScriptedProvider};
pub use synthetic::SyntheticProvider;
pub use template::{render_template, template_source, template_variables};

use crate::model::hex_digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Entrypoint,
    Goal,
    Intent,
    Dimension,
    Output,
    Linking,
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 6] = [
        ModuleKind::Entrypoint,
        ModuleKind::Goal,
        ModuleKind::Intent,
        ModuleKind::Dimension,
        ModuleKind::Output,
        ModuleKind::Linking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleKind::Entrypoint => "entrypoint",
            ModuleKind::Goal => "goal",
            ModuleKind::Intent => "intent",
            ModuleKind::Dimension => "dimension",
            ModuleKind::Output => "output",
            ModuleKind::Linking => "linking",
        }
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModuleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModuleKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown module {s:?}"))
    }
}

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";
pub const DEFAULT_API_KEY_ENV: &str = "INTENTFLOW_API_KEY";
pub const SMALL_MODEL: &str = "gpt-4o-mini-2024-07-18";
pub const LARGE_MODEL: &str = "gpt-4o-2024-08-06";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub model_by_module: BTreeMap<ModuleKind, String>,
    pub temperature_by_module: BTreeMap<ModuleKind, f64>,
    pub timeout_secs: u64,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Cap on concurrent in-flight requests.
    pub max_in_flight: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        let model_by_module = ModuleKind::ALL
            .into_iter()
            .map(|k| {
                let m = match k {
                    ModuleKind::Goal | ModuleKind::Intent | ModuleKind::Dimension => SMALL_MODEL,
                    _ => LARGE_MODEL,
                };
                (k, m.to_string())
            })
            .collect();
        let temperature_by_module = ModuleKind::ALL
            .into_iter()
            .map(|k| (k, if k == ModuleKind::Output { 0.7 } else { 0.0 }))
            .collect();
        ProviderConfig {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            model_by_module,
            temperature_by_module,
            timeout_secs: 60,
            max_retries: 2,
            max_in_flight: 8,
        }
    }
}

impl ProviderConfig {
    pub fn model(&self, kind: ModuleKind) -> &str {
        self.model_by_module.get(&kind).map(String::as_str).unwrap_or(LARGE_MODEL)
    }

    pub fn temperature(&self, kind: ModuleKind) -> f64 {
        self.temperature_by_module.get(&kind).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_retries < 1 {
            return Err("max_retries must be at least 1".into());
        }
        if self.max_in_flight < 1 {
            return Err("max_in_flight must be at least 1".into());
        }
        if self.timeout_secs == 0 {
            return Err("timeout_secs must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("template {kind} needs variable {name:?}")]
    MissingVariable { kind: ModuleKind, name: String },
    #[error("provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("{kind} response violated its schema after {attempts} attempts: {detail}")]
    SchemaViolation { kind: ModuleKind, attempts: u32, detail: String },
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("no recorded response for request {key} ({kind})")]
    ReplayMiss { kind: ModuleKind, key: String },
    #[error("fixture store: {0}")]
    Store(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: "assistant".into(), content: content.into() }
    }
}

/// A fully rendered request, ready for any provider.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub kind: ModuleKind,
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<Message>,
    /// Strict JSON schema of the expected reply.
    pub schema: serde_json::Value,
    /// Template variables plus `attempt`; local providers may inspect them.
    pub context: BTreeMap<String, String>,
    pub timeout: Duration,
}

impl CompletionRequest {
    pub fn key(&self) -> String {
        request_key(self.kind, &self.model, &self.messages)
    }
}

/// Stable hash of (kind, model, conversation).
pub fn request_key(kind: ModuleKind, model: &str, messages: &[Message]) -> String {
    let msgs: Vec<[&str; 2]> = messages.iter().map(|m| [m.role.as_str(), m.content.as_str()]).collect();
    let doc = serde_json::json!([kind.as_str(), model, msgs]);
    hex_digest(&serde_json::to_vec(&doc).expect("key document serializes"))
}

pub trait Provider: Send + Sync {
    /// Returns the raw reply text.
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredResponse {
    pub kind: ModuleKind,
    pub payload: serde_json::Value,
    pub raw: String,
    pub attempts: u32,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// One request as sent, kept for inspection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub kind: ModuleKind,
    pub model: String,
    pub key: String,
    pub messages: Vec<Message>,
}

impl JournalEntry {
    /// All message contents joined, for containment checks.
    pub fn text(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    provider: Arc<dyn Provider>,
    config: ProviderConfig,
    mode: ValidationMode,
    permits: Semaphore,
    journal: Option<Mutex<Vec<JournalEntry>>>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").field("config", &self.config).field("mode", &self.mode).finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, config: ProviderConfig) -> Self {
        let permits = Semaphore::new(config.max_in_flight);
        Gateway { provider, config, mode: ValidationMode::Strict, permits, journal: None }
    }

    pub fn with_mode(mut self, mode: ValidationMode) -> Self {
        self.mode = mode;
        self
    }

    /// Keeps a copy of every request sent.
    pub fn with_journal(mut self) -> Self {
        self.journal = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn mode(&self) -> ValidationMode {
        self.mode
    }

    /// Removes and returns the journal. Runs of concurrent linking requests
    /// are sorted by key so the result does not depend on thread timing.
    pub fn take_journal(&self) -> Vec<JournalEntry> {
        let Some(j) = &self.journal else { return Vec::new() };
        let mut entries = std::mem::take(&mut *j.lock().unwrap_or_else(|e| e.into_inner()));
        let mut i = 0;
        while i < entries.len() {
            let mut k = i;
            while k < entries.len() && entries[k].kind == ModuleKind::Linking {
                k += 1;
            }
            if k > i {
                entries[i..k].sort_by(|a, b| a.key.cmp(&b.key));
                i = k;
            } else {
                i += 1;
            }
        }
        entries
    }

    pub fn render_request(
        &self,
        kind: ModuleKind,
        vars: &BTreeMap<String, String>,
    ) -> Result<CompletionRequest, GatewayError> {
        let prompt = render_template(kind, vars)?;
        Ok(CompletionRequest {
            kind,
            model: self.config.model(kind).to_string(),
            temperature: self.config.temperature(kind),
            messages: vec![Message::system(prompt)],
            schema: schema::json_schema(kind),
            context: vars.clone(),
            timeout: Duration::from_secs(self.config.timeout_secs),
        })
    }

    /// Renders, sends, parses, and validates, retrying malformed replies up
    /// to `max_retries` times.
    pub fn complete_structured(
        &self,
        kind: ModuleKind,
        vars: &BTreeMap<String, String>,
    ) -> Result<StructuredResponse, GatewayError> {
        let mut request = self.render_request(kind, vars)?;
        let started = Instant::now();
        let attempts_allowed = self.config.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts_allowed {
            request.context.insert("attempt".into(), attempt.to_string());
            if let Some(j) = &self.journal {
                j.lock().unwrap_or_else(|e| e.into_inner()).push(JournalEntry {
                    kind,
                    model: request.model.clone(),
                    key: request.key(),
                    messages: request.messages.clone(),
                });
            }
            let raw = {
                let _permit = self.permits.acquire();
                self.provider.complete(&request)?
            };
            match schema::validate(kind, &raw, self.mode) {
                Ok(payload) => {
                    return Ok(StructuredResponse {
                        kind,
                        payload,
                        raw,
                        attempts: attempt,
                        latency: started.elapsed(),
                    })
                }
                Err(detail) => {
                    tracing::debug!(%kind, attempt, %detail, "malformed response");
                    request.messages.push(Message::assistant(raw));
                    request.messages.push(Message::user(schema::repair_instruction(&detail)));
                    last_error = detail;
                }
            }
        }
        Err(GatewayError::SchemaViolation { kind, attempts: attempts_allowed, detail: last_error })
    }
}
