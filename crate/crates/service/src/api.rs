//! HTTP routes. Bodies are JSON; errors are `{"error": kind, "detail": text}`.

use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use intentflow_core::pipeline::PanelEdit;
use intentflow_core::*;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;

use crate::hub::EventEnvelope;
use crate::state::{links_view, AppState, ChatRequest, ServiceError};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::Busy(_) => (StatusCode::CONFLICT, "turn_in_flight"),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            ServiceError::Invalid(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
            ServiceError::Upstream(_) => (StatusCode::BAD_GATEWAY, "upstream"),
            ServiceError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        (status, Json(json!({ "error": kind, "detail": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;
type Shared = State<Arc<AppState>>;

/// Parses a JSON body ourselves so malformed bodies get our 422 shape.
fn body<T: serde::de::DeserializeOwned>(raw: &str) -> ApiResult<T> {
    serde_json::from_str(raw).map_err(|e| ServiceError::Invalid(format!("malformed body: {e}")))
}

fn document(state: &SessionState) -> Response {
    ([("content-type", "application/json")], state.to_document_json()).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/import", post(import_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/export", get(get_session))
        .route("/sessions/{id}/chat", post(chat))
        .route("/sessions/{id}/goal", post(edit_goal))
        .route("/sessions/{id}/intents", post(add_intent))
        .route("/sessions/{id}/intents/{iid}", patch(patch_intent).delete(delete_intent))
        .route("/sessions/{id}/dimensions/{did}", patch(patch_dimension))
        .route("/sessions/{id}/pages", get(list_pages))
        .route("/sessions/{id}/pages/{n}", get(get_page))
        .route("/sessions/{id}/pages/{n}/links", get(get_links))
        .route("/sessions/{id}/pages/{n}/diff", get(get_diff))
        .route("/sessions/{id}/rollback", post(rollback))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/actions", get(actions))
        .route("/sessions/{id}/actions/{aid}/annotate", post(annotate))
        .route("/sessions/{id}/telemetry", post(telemetry))
        .with_state(state)
}

async fn health(State(app): Shared) -> Json<Value> {
    Json(json!({ "status": "ok", "sessions": app.list().len() }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    session_id: Option<String>,
}

async fn create_session(State(app): Shared, raw: String) -> ApiResult<(StatusCode, Json<Value>)> {
    let b: CreateBody = if raw.trim().is_empty() { CreateBody::default() } else { body(&raw)? };
    let id = app.create_session(b.session_id)?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn list_sessions(State(app): Shared) -> Json<Value> {
    Json(json!({ "sessions": app.list() }))
}

async fn import_session(State(app): Shared, raw: String) -> ApiResult<(StatusCode, Json<Value>)> {
    let id = app.import_session(&raw)?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn get_session(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(document(&app.session(&id)?.snapshot()))
}

async fn chat(State(app): Shared, Path(id): Path<String>, raw: String) -> ApiResult<(StatusCode, Json<Value>)> {
    app.session(&id)?;
    let req: ChatRequest = body(&raw)?;
    let accepted = app.start_turn(&id, req)?;
    Ok((StatusCode::ACCEPTED, Json(serde_json::to_value(accepted).expect("serializes"))))
}

async fn edit_goal(State(app): Shared, Path(id): Path<String>, raw: String) -> ApiResult<Json<Value>> {
    app.session(&id)?;
    let edit: GoalEdit = body(&raw)?;
    Ok(Json(json!(app.panel_edit(&id, PanelEdit::Goal(edit)).await?)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AddIntentBody {
    text: String,
}

async fn add_intent(State(app): Shared, Path(id): Path<String>, raw: String) -> ApiResult<(StatusCode, Json<Value>)> {
    app.session(&id)?;
    let b: AddIntentBody = body(&raw)?;
    let outcome = app.panel_edit(&id, PanelEdit::Intent(IntentEdit::Add { text: b.text })).await?;
    Ok((StatusCode::CREATED, Json(json!(outcome))))
}

/// Exactly one of `text` (revise) or `kept` (keep flag).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchIntentBody {
    text: Option<String>,
    kept: Option<bool>,
}

async fn patch_intent(
    State(app): Shared,
    Path((id, iid)): Path<(String, u32)>,
    raw: String,
) -> ApiResult<Json<Value>> {
    app.session(&id)?;
    let b: PatchIntentBody = body(&raw)?;
    let intent = IntentId(iid);
    let outcome = match (b.text, b.kept) {
        (Some(text), None) => app.panel_edit(&id, PanelEdit::Intent(IntentEdit::Revise { id: intent, text })).await?,
        (None, Some(kept)) => app.set_keep(&id, intent, kept).await?,
        _ => return Err(ServiceError::Invalid("give exactly one of \"text\" or \"kept\"".into())),
    };
    Ok(Json(json!(outcome)))
}

async fn delete_intent(State(app): Shared, Path((id, iid)): Path<(String, u32)>) -> ApiResult<Json<Value>> {
    let outcome = app.panel_edit(&id, PanelEdit::Intent(IntentEdit::Delete { id: IntentId(iid) })).await?;
    Ok(Json(json!(outcome)))
}

/// A dimension edit without the id, which comes from the path.
#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
enum DimensionPatch {
    SetSlider { value: i64 },
    SetRadio { option: String },
    AddTag { tag: String },
    RemoveTag { tag: String },
}

async fn patch_dimension(
    State(app): Shared,
    Path((id, did)): Path<(String, u32)>,
    raw: String,
) -> ApiResult<Json<Value>> {
    app.session(&id)?;
    let id_ = DimensionId(did);
    let edit = match body::<DimensionPatch>(&raw)? {
        DimensionPatch::SetSlider { value } => DimensionEdit::SetSlider { id: id_, value },
        DimensionPatch::SetRadio { option } => DimensionEdit::SetRadio { id: id_, option },
        DimensionPatch::AddTag { tag } => DimensionEdit::AddTag { id: id_, tag },
        DimensionPatch::RemoveTag { tag } => DimensionEdit::RemoveTag { id: id_, tag },
    };
    Ok(Json(json!(app.panel_edit(&id, PanelEdit::Dimension(edit)).await?)))
}

async fn list_pages(State(app): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let pages = app.session(&id)?.read(|s| s.list_pages());
    Ok(Json(json!({ "pages": pages })))
}

fn page(app: &AppState, id: &str, n: u32) -> ApiResult<OutputPage> {
    app.session(id)?
        .read(|s| s.page_at(n).cloned())
        .map_err(|_| ServiceError::NotFound(format!("session {id} has no page {n}")))
}

async fn get_page(State(app): Shared, Path((id, n)): Path<(String, u32)>) -> ApiResult<Json<OutputPage>> {
    Ok(Json(page(&app, &id, n)?))
}

async fn get_links(State(app): Shared, Path((id, n)): Path<(String, u32)>) -> ApiResult<Json<Value>> {
    Ok(Json(links_view(&page(&app, &id, n)?)))
}

#[derive(Debug, Deserialize)]
struct DiffQuery {
    against: Option<u32>,
}

async fn get_diff(
    State(app): Shared,
    Path((id, n)): Path<(String, u32)>,
    Query(q): Query<DiffQuery>,
) -> ApiResult<Json<Value>> {
    let new = page(&app, &id, n)?;
    let against = match q.against {
        Some(m) => m,
        None if n > 1 => n - 1,
        None => return Err(ServiceError::Invalid("page 1 has no previous page; pass ?against=".into())),
    };
    let old = page(&app, &id, against)?;
    let view = compute_diff(&old.document, &new.document);
    Ok(Json(json!({ "page": n, "against": against, "segments": view.segments })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RollbackBody {
    page: u32,
}

async fn rollback(State(app): Shared, Path(id): Path<String>, raw: String) -> ApiResult<(StatusCode, Json<Value>)> {
    app.session(&id)?;
    let b: RollbackBody = body(&raw)?;
    let outcome = app.rollback(&id, b.page).await?;
    Ok((StatusCode::CREATED, Json(json!(outcome))))
}

async fn actions(State(app): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let log = app.session(&id)?.read(|s| s.action_log().to_vec());
    Ok(Json(json!({ "actions": log })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotateBody {
    kind: ActionKind,
}

async fn annotate(
    State(app): Shared,
    Path((id, aid)): Path<(String, u64)>,
    raw: String,
) -> ApiResult<Json<ActionRecord>> {
    app.session(&id)?;
    let b: AnnotateBody = body(&raw)?;
    Ok(Json(app.annotate(&id, ActionId(aid), b.kind).await?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TelemetryBody {
    kind: TelemetryKind,
    #[serde(default)]
    detail: String,
}

async fn telemetry(State(app): Shared, Path(id): Path<String>, raw: String) -> ApiResult<StatusCode> {
    app.session(&id)?;
    let b: TelemetryBody = body(&raw)?;
    app.telemetry(&id, b.kind, b.detail).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    after: Option<u64>,
}

fn sse_event(env: &EventEnvelope) -> Event {
    Event::default()
        .id(env.seq.to_string())
        .event(env.kind.as_str())
        .data(serde_json::to_string(env).expect("envelope serializes"))
}

/// Server-sent events. Resumes after `Last-Event-ID` (or `?after=`) from the
/// session's buffer, then follows live.
async fn events(
    State(app): Shared,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let handle = app.session(&id)?;
    let after = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse().ok())
        .or(q.after)
        .unwrap_or(0);
    let (backlog, rx) = handle.hub.subscribe(after);
    let last = backlog.last().map_or(after, |e| e.seq);
    let live = stream::unfold((rx, last, handle), |(mut rx, mut last, handle)| async move {
        loop {
            match rx.recv().await {
                Ok(env) if env.seq <= last => continue,
                Ok(env) => {
                    last = env.seq;
                    return Some((vec![env], (rx, last, handle)));
                }
                Err(RecvError::Lagged(_)) => {
                    let missed = handle.hub.since(last);
                    match missed.last() {
                        Some(e) if missed[0].seq == last + 1 => {
                            last = e.seq;
                            return Some((missed, (rx, last, handle)));
                        }
                        // Fell out of the buffer; end the stream so the client reconnects.
                        _ => return None,
                    }
                }
                Err(RecvError::Closed) => return None,
            }
        }
    });
    let all = stream::iter(vec![backlog])
        .chain(live)
        .flat_map(|batch| stream::iter(batch.into_iter().map(|e| Ok(sse_event(&e)))));
    Ok(Sse::new(all).keep_alive(KeepAlive::default()))
}

use futures::StreamExt as _;
