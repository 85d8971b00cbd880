#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use intentflow_core::clock::SteppingClock;
use intentflow_core::gateway::{CompletionRequest, ScriptedProvider};
use intentflow_core::pipeline::PipelineOptions;
use intentflow_core::{Gateway, GatewayError, ModuleKind, Provider, ProviderConfig};
use intentflow_service::{router, AppState, Engine, EventEnvelope};
use serde_json::Value;
use tower::ServiceExt;

pub const FIRST_PROMPT: &str = "Write a scientific and concise article on photosynthesis";

pub fn walkthrough() -> ScriptedProvider {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/authoring/walkthrough.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Fails every request of one module kind while armed.
pub struct Flaky {
    inner: ScriptedProvider,
    pub fail: Mutex<Option<ModuleKind>>,
}

impl Flaky {
    pub fn new(inner: ScriptedProvider) -> Arc<Self> {
        Arc::new(Flaky { inner, fail: Mutex::new(None) })
    }

    pub fn arm(&self, kind: Option<ModuleKind>) {
        *self.fail.lock().unwrap() = kind;
    }
}

impl Provider for Flaky {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        if *self.fail.lock().unwrap() == Some(request.kind) {
            return Err(GatewayError::ProviderUnreachable("injected".into()));
        }
        self.inner.complete(request)
    }
}

/// Blocks every request until [`Gate::open`] is called.
pub struct Gate {
    inner: Arc<dyn Provider>,
    open: Mutex<bool>,
    cv: Condvar,
}

impl Gate {
    pub fn new(inner: impl Provider + 'static) -> Arc<Self> {
        Arc::new(Gate { inner: Arc::new(inner), open: Mutex::new(false), cv: Condvar::new() })
    }

    pub fn open(&self) {
        *self.open.lock().unwrap() = true;
        self.cv.notify_all();
    }
}

impl Provider for Gate {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let mut open = self.open.lock().unwrap();
        while !*open {
            open = self.cv.wait(open).unwrap();
        }
        drop(open);
        self.inner.complete(request)
    }
}

pub fn engine(provider: Arc<dyn Provider>, snapshot_every: u64) -> Engine {
    Engine {
        gateway: Arc::new(Gateway::new(provider, ProviderConfig { max_retries: 0, ..Default::default() })),
        options: PipelineOptions::default(),
        clock: Arc::new(SteppingClock::fixed()),
        snapshot_every,
    }
}

pub fn open(dir: &Path, provider: Arc<dyn Provider>) -> Arc<AppState> {
    Arc::new(AppState::open(dir, engine(provider, 0)).unwrap())
}

pub async fn call(app: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = router(app.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

/// Waits until no chat turn is running for `id`.
pub async fn settle(app: &Arc<AppState>, id: &str) {
    let handle = app.session(id).unwrap();
    for _ in 0..2000 {
        if !handle.turn_in_flight() {
            return;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("turn did not finish");
}

pub fn events(app: &Arc<AppState>, id: &str, after: u64) -> Vec<EventEnvelope> {
    app.session(id).unwrap().hub.since(after)
}

pub fn kinds(events: &[EventEnvelope]) -> Vec<&'static str> {
    events.iter().map(|e| e.kind.as_str()).collect()
}

/// Creates a session and runs the walkthrough's first turn on it.
pub async fn seeded(app: &Arc<AppState>, id: &str) {
    let (status, _) = call(app, "POST", "/sessions", Some(serde_json::json!({ "session_id": id }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, _) = call(app, "POST", &format!("/sessions/{id}/chat"), Some(serde_json::json!({ "prompt": FIRST_PROMPT }))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    settle(app, id).await;
}

pub fn log_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("sessions").join(id).join("events.jsonl")
}
