//! Record/replay fixture store.
//!
//! Layout of a store directory:
//!
//! - `<key>.json`: one [`FixtureEntry`] per request, where `<key>` is the
//!   request key (hex SHA-256 of kind, model, and messages).
//! - `index.json`: `{"schema": "intentflow/fixtures/v1", "entries": {<key>: {"kind", "model"}}}`.
//!
//! Replay reads only `<key>.json`; the index is informational.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, GatewayError, Message, ModuleKind, Provider};

pub const FIXTURE_SCHEMA: &str = "intentflow/fixtures/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureMode {
    Record,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub key: String,
    pub kind: ModuleKind,
    pub model: String,
    pub messages: Vec<Message>,
    pub response: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    schema: String,
    entries: BTreeMap<String, IndexEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    kind: ModuleKind,
    model: String,
}

pub struct FixtureProvider {
    mode: FixtureMode,
    dir: PathBuf,
    upstream: Option<Arc<dyn Provider>>,
}

impl FixtureProvider {
    pub fn replay(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(GatewayError::Store(format!("fixture store {} does not exist", dir.display())));
        }
        Ok(FixtureProvider { mode: FixtureMode::Replay, dir, upstream: None })
    }

    /// Proxies `upstream` and stores every response under `dir`.
    pub fn record(dir: impl Into<PathBuf>, upstream: Arc<dyn Provider>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| GatewayError::Store(format!("{}: {e}", dir.display())))?;
        Ok(FixtureProvider { mode: FixtureMode::Record, dir, upstream: Some(upstream) })
    }

    pub fn mode(&self) -> FixtureMode {
        self.mode
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn load(&self, key: &str) -> Result<Option<FixtureEntry>, GatewayError> {
        let path = self.entry_path(key);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| GatewayError::Store(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(GatewayError::Store(format!("{}: {e}", path.display()))),
        }
    }

    pub fn store(&self, entry: &FixtureEntry) -> Result<(), GatewayError> {
        // Several recorders may share one directory; the index update is a
        // read-modify-write.
        let _guard = STORE_LOCK.lock().unwrap_or_else(|e| e.into_inner());
        let err = |p: &Path, e: &dyn std::fmt::Display| GatewayError::Store(format!("{}: {e}", p.display()));
        let body = serde_json::to_string_pretty(entry).expect("fixture serializes");
        write_atomic(&self.entry_path(&entry.key), &body).map_err(|e| err(&self.entry_path(&entry.key), &e))?;

        let index_path = self.dir.join("index.json");
        let mut index: Index = match fs::read_to_string(&index_path) {
            Ok(t) => serde_json::from_str(&t).map_err(|e| err(&index_path, &e))?,
            Err(_) => Index::default(),
        };
        index.schema = FIXTURE_SCHEMA.to_string();
        index.entries.insert(entry.key.clone(), IndexEntry { kind: entry.kind, model: entry.model.clone() });
        let body = serde_json::to_string_pretty(&index).expect("index serializes");
        write_atomic(&index_path, &body).map_err(|e| err(&index_path, &e))
    }
}

static STORE_LOCK: Mutex<()> = Mutex::new(());

fn write_atomic(path: &Path, body: &str) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("json.{}.tmp", std::process::id()));
    fs::write(&tmp, format!("{body}\n"))?;
    fs::rename(tmp, path)
}

impl Provider for FixtureProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let key = request.key();
        match self.mode {
            FixtureMode::Replay => self
                .load(&key)?
                .map(|e| e.response)
                .ok_or(GatewayError::ReplayMiss { kind: request.kind, key }),
            FixtureMode::Record => {
                let upstream = self.upstream.as_ref().expect("record mode has an upstream");
                let response = upstream.complete(request)?;
                self.store(&FixtureEntry {
                    key,
                    kind: request.kind,
                    model: request.model.clone(),
                    messages: request.messages.clone(),
                    response: response.clone(),
                })?;
                Ok(response)
            }
        }
    }
}
