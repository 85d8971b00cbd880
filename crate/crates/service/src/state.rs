//! Sessions in memory, their writers, and every mutation the API offers.
//!
//! Each session has one writer (an async mutex around its event log). A
//! mutation clones the live state, applies the change to the clone, appends
//! the resulting record to the log, and only then swaps the clone in. Any
//! failure before the swap leaves the session exactly as it was.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use intentflow_core::clock::Clock;
use intentflow_core::pipeline::{PanelEditResult, PipelineOptions};
use intentflow_core::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::{Mutex, OwnedMutexGuard};

use crate::hub::{EventHub, EventKind};
use crate::store::{valid_session_id, DataDir, EventLog, StoreError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("a turn is already in flight for session {0}")]
    Busy(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Upstream(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl From<ModelError> for ServiceError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::AlreadyAnnotated(_) => ServiceError::Conflict(e.to_string()),
            _ => ServiceError::Invalid(e.to_string()),
        }
    }
}

impl From<PipelineError> for ServiceError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Model(m) => m.into(),
            e if e.is_client_error() => ServiceError::Invalid(e.to_string()),
            e => ServiceError::Upstream(e.to_string()),
        }
    }
}

pub struct SessionHandle {
    pub id: String,
    state: RwLock<SessionState>,
    writer: Arc<Mutex<EventLog>>,
    turn_in_flight: AtomicBool,
    turns_started: AtomicU64,
    pub hub: EventHub,
}

impl SessionHandle {
    fn new(id: String, state: SessionState, log: EventLog) -> Self {
        SessionHandle {
            hub: EventHub::new(&id),
            id,
            state: RwLock::new(state),
            writer: Arc::new(Mutex::new(log)),
            turn_in_flight: AtomicBool::new(false),
            turns_started: AtomicU64::new(0),
        }
    }

    /// A consistent copy of the live state.
    pub fn snapshot(&self) -> SessionState {
        self.state.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn read<T>(&self, f: impl FnOnce(&SessionState) -> T) -> T {
        f(&self.state.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn turn_in_flight(&self) -> bool {
        self.turn_in_flight.load(Ordering::SeqCst)
    }

    /// Waits for the writer unless a chat turn holds it.
    async fn writer(&self) -> Result<OwnedMutexGuard<EventLog>, ServiceError> {
        if self.turn_in_flight() {
            return Err(ServiceError::Busy(self.id.clone()));
        }
        let guard = self.writer.clone().lock_owned().await;
        if self.turn_in_flight() {
            return Err(ServiceError::Busy(self.id.clone()));
        }
        Ok(guard)
    }

    /// Persists `events` (already applied to `staged`) and swaps `staged` in.
    fn commit(
        &self,
        log: &mut EventLog,
        staged: SessionState,
        events: &[SessionEvent],
        snapshot_every: u64,
    ) -> Result<(), ServiceError> {
        log.append(events)?;
        if let Err(e) = log.maybe_snapshot(&staged, snapshot_every) {
            tracing::warn!(session = %self.id, error = %e, "snapshot failed; the log alone still holds the state");
        }
        *self.state.write().unwrap_or_else(|e| e.into_inner()) = staged;
        Ok(())
    }
}

/// Service-wide settings that shape every session.
#[derive(Clone)]
pub struct Engine {
    pub gateway: Arc<Gateway>,
    pub options: PipelineOptions,
    pub clock: Arc<dyn Clock>,
    /// Records between snapshots; 0 disables snapshots.
    pub snapshot_every: u64,
}

impl Engine {
    fn pipeline(&self) -> Pipeline {
        Pipeline::new(self.gateway.clone()).with_clock(self.clock.clone()).with_options(self.options.clone())
    }
}

pub struct AppState {
    data: DataDir,
    sessions: RwLock<BTreeMap<String, Arc<SessionHandle>>>,
    engine: Engine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatRequest {
    pub prompt: String,
    #[serde(default)]
    pub targeted_intent: Option<IntentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnAccepted {
    pub session_id: String,
    pub turn_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub revision: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_id: Option<ActionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_page: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionListing {
    pub session_id: String,
    pub pages: usize,
    pub turns: u32,
    pub turn_in_flight: bool,
}

impl AppState {
    /// Opens the data directory and recovers every stored session.
    pub fn open(data_dir: &Path, engine: Engine) -> Result<Self, ServiceError> {
        let data = DataDir::open(data_dir)?;
        let mut sessions = BTreeMap::new();
        for id in data.session_ids()? {
            let (log, state, _) = EventLog::open(&data.session_dir(&id), &id)?;
            sessions.insert(id.clone(), Arc::new(SessionHandle::new(id, state, log)));
        }
        tracing::info!(dir = %data_dir.display(), sessions = sessions.len(), "data directory opened");
        Ok(AppState { data, sessions: RwLock::new(sessions), engine })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn data_dir(&self) -> &Path {
        self.data.root()
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown session {id}")))
    }

    pub fn list(&self) -> Vec<SessionListing> {
        let sessions = self.sessions.read().unwrap_or_else(|e| e.into_inner());
        sessions
            .values()
            .map(|h| {
                h.read(|s| SessionListing {
                    session_id: h.id.clone(),
                    pages: s.pages().len(),
                    turns: s.turn_counter(),
                    turn_in_flight: h.turn_in_flight(),
                })
            })
            .collect()
    }

    fn insert(&self, state: SessionState, imported: bool) -> Result<String, ServiceError> {
        let id = state.session_id().0.clone();
        if !valid_session_id(&id) {
            return Err(ServiceError::Invalid(format!("invalid session id {id:?}: use letters, digits, '-' or '_'")));
        }
        let mut sessions = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        let dir = self.data.session_dir(&id);
        if sessions.contains_key(&id) || dir.exists() {
            return Err(ServiceError::Conflict(format!("session {id} already exists")));
        }
        let log = EventLog::create(&dir, imported.then_some(&state))?;
        sessions.insert(id.clone(), Arc::new(SessionHandle::new(id.clone(), state, log)));
        Ok(id)
    }

    pub fn create_session(&self, id: Option<String>) -> Result<String, ServiceError> {
        let id = id.map_or_else(SessionId::random, SessionId);
        self.insert(SessionState::with_id(id), false)
    }

    /// Creates a session from an exported document.
    pub fn import_session(&self, document: &str) -> Result<String, ServiceError> {
        let state = SessionState::from_document_json(document)?;
        self.insert(state, true)
    }

    /// Accepts a chat turn and runs it in the background. Progress and the
    /// result arrive on the session's event stream.
    pub fn start_turn(self: &Arc<Self>, id: &str, req: ChatRequest) -> Result<TurnAccepted, ServiceError> {
        let handle = self.session(id)?;
        if req.prompt.trim().is_empty() {
            return Err(ServiceError::Invalid("prompt must not be empty".into()));
        }
        if let Some(target) = req.targeted_intent {
            if handle.read(|s| s.intent(target).is_none()) {
                return Err(ServiceError::Invalid(format!("unknown intent {target}")));
            }
        }
        let guard = handle.writer.clone().try_lock_owned().map_err(|_| ServiceError::Busy(id.to_string()))?;
        handle.turn_in_flight.store(true, Ordering::SeqCst);
        let turn_id = format!("turn-{}", handle.turns_started.fetch_add(1, Ordering::SeqCst) + 1);
        let accepted = TurnAccepted { session_id: id.to_string(), turn_id: turn_id.clone() };
        let engine = self.engine.clone();
        tokio::task::spawn_blocking(move || {
            let mut log = guard;
            run_turn(&engine, &handle, &mut log, &turn_id, &req);
            handle.turn_in_flight.store(false, Ordering::SeqCst);
            drop(log);
        });
        Ok(accepted)
    }

    pub async fn panel_edit(&self, id: &str, edit: PanelEdit) -> Result<EditOutcome, ServiceError> {
        let handle = self.session(id)?;
        let mut log = handle.writer().await?;
        let engine = self.engine.clone();
        let h = handle.clone();
        let result = tokio::task::spawn_blocking(move || -> Result<EditOutcome, ServiceError> {
            let mut staged = h.snapshot();
            let on_status = &mut |m: &str| {
                h.hub.emit(EventKind::Status, json!({ "message": m }));
            };
            let r: PanelEditResult = engine.pipeline().apply_panel_edit(&mut staged, edit, on_status)?;
            h.commit(&mut log, staged, &r.events, engine.snapshot_every)?;
            Ok(EditOutcome { revision: r.revision.revision, action_id: r.revision.action_id, new_page: r.new_page })
        })
        .await
        .map_err(|e| ServiceError::Upstream(format!("edit worker failed: {e}")))?;
        match &result {
            Ok(outcome) => announce_panel(&handle, outcome),
            Err(e @ ServiceError::Upstream(_)) => {
                handle.hub.emit(EventKind::Error, json!({ "message": e.to_string() }));
            }
            Err(_) => {}
        }
        result
    }

    /// Sets the keep flag to `kept`. Toggles only when it differs.
    pub async fn set_keep(&self, id: &str, intent: IntentId, kept: bool) -> Result<EditOutcome, ServiceError> {
        let handle = self.session(id)?;
        let current = handle.read(|s| s.intent(intent).map(|i| (i.kept, s.panel_revision())));
        match current {
            None => Err(ServiceError::Invalid(format!("not found: unknown intent {intent}"))),
            Some((k, revision)) if k == kept => Ok(EditOutcome { revision, action_id: None, new_page: None }),
            Some(_) => self.panel_edit(id, PanelEdit::Intent(IntentEdit::ToggleKeep { id: intent })).await,
        }
    }

    pub async fn rollback(&self, id: &str, page: u32) -> Result<EditOutcome, ServiceError> {
        let handle = self.session(id)?;
        let mut log = handle.writer().await?;
        let mut staged = handle.snapshot();
        let event = SessionEvent::RolledBack { page, at: self.engine.clock.now() };
        let rev = staged.apply(&event)?;
        handle.commit(&mut log, staged, &[event], self.engine.snapshot_every)?;
        let outcome = EditOutcome { revision: rev.revision, action_id: rev.action_id, new_page: rev.page_number };
        announce_panel(&handle, &outcome);
        Ok(outcome)
    }

    pub async fn annotate(&self, id: &str, action: ActionId, kind: ActionKind) -> Result<ActionRecord, ServiceError> {
        let handle = self.session(id)?;
        if handle.read(|s| s.action_log().iter().all(|a| a.action_id != action)) {
            return Err(ServiceError::NotFound(format!("unknown action {action}")));
        }
        let mut log = handle.writer().await?;
        let mut staged = handle.snapshot();
        let event = SessionEvent::Annotated { action_id: action, kind };
        staged.apply(&event)?;
        let record = staged.action_log().iter().find(|a| a.action_id == action).cloned().expect("action exists");
        handle.commit(&mut log, staged, &[event], self.engine.snapshot_every)?;
        Ok(record)
    }

    pub async fn telemetry(&self, id: &str, kind: TelemetryKind, detail: String) -> Result<(), ServiceError> {
        let handle = self.session(id)?;
        let mut log = handle.writer().await?;
        let mut staged = handle.snapshot();
        let event = SessionEvent::Telemetry { kind, detail, at: self.engine.clock.now() };
        staged.apply(&event)?;
        handle.commit(&mut log, staged, &[event], self.engine.snapshot_every)
    }
}

fn announce_panel(handle: &SessionHandle, outcome: &EditOutcome) {
    let panel = handle.read(|s| serde_json::to_value(s.panel()).expect("panel serializes"));
    handle.hub.emit(EventKind::PanelUpdated, json!({ "revision": outcome.revision, "panel": panel }));
    if let Some(n) = outcome.new_page {
        let provenance = handle.read(|s| s.page_at(n).map(|p| p.provenance).ok());
        handle.hub.emit(EventKind::PageReady, json!({ "page_number": n, "provenance": provenance }));
    }
}

fn run_turn(engine: &Engine, handle: &SessionHandle, log: &mut EventLog, turn_id: &str, req: &ChatRequest) {
    let mut staged = handle.snapshot();
    let on_status = &mut |m: &str| {
        handle.hub.emit(EventKind::Status, json!({ "turn_id": turn_id, "message": m }));
    };
    let outcome = engine
        .pipeline()
        .run_turn(&mut staged, &req.prompt, req.targeted_intent, on_status)
        .map_err(|e| (e.stage(), e.to_string()))
        .and_then(|r| {
            handle
                .commit(log, staged, std::slice::from_ref(&r.event), engine.snapshot_every)
                .map(|()| r)
                .map_err(|e| (None, e.to_string()))
        });
    match outcome {
        Ok(r) => {
            handle.hub.emit(
                EventKind::Reply,
                json!({
                    "turn_id": turn_id,
                    "text": r.decision.direct_reply,
                    "action_id": r.action_id,
                    "invoked": r.decision.invoke,
                    "panel_changed": !r.panel_changes.is_empty(),
                }),
            );
            if let Some(n) = r.new_page {
                let provenance = handle.read(|s| s.page_at(n).map(|p| p.provenance).ok());
                handle.hub.emit(
                    EventKind::PageReady,
                    json!({ "turn_id": turn_id, "page_number": n, "provenance": provenance }),
                );
            }
        }
        Err((stage, message)) => {
            tracing::warn!(session = %handle.id, turn = turn_id, error = %message, "turn failed");
            handle.hub.emit(EventKind::Error, json!({ "turn_id": turn_id, "stage": stage, "message": message }));
        }
    }
}

/// Value of a page's links as served to clients: spans with their text.
pub fn links_view(page: &OutputPage) -> Value {
    let links: Vec<Value> = page
        .links
        .iter()
        .map(|l| {
            let (kind, label) = match &l.source {
                LinkSource::Intent { id } => {
                    ("intent", page.snapshot.intent(*id).map(|i| i.text.clone()).unwrap_or_default())
                }
                LinkSource::DimensionValue { dimension, value } => (
                    "dimension_value",
                    page.snapshot.dimension(*dimension).map(|d| format!("{}: {value}", d.title)).unwrap_or_default(),
                ),
            };
            let spans: Vec<Value> = l
                .spans
                .iter()
                .map(|s| json!({ "start": s.start, "end": s.end, "text": page.document.slice(*s) }))
                .collect();
            json!({ "source": l.source, "kind": kind, "label": label, "spans": spans })
        })
        .collect();
    json!({ "page_number": page.page_number, "links": links })
}
