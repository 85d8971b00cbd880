//! The session state machine.
//!
//! Every mutation is expressed as a [`SessionEvent`] and applied through
//! [`SessionState::apply`], so a persisted event log replays to exactly the
//! same state. The convenience methods (`apply_intent_edit`, `rollback`, ...)
//! build the event and apply it. Each application validates first and only
//! then mutates: a rejected event leaves the session untouched.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::document::Link;
use super::page::{hex_digest, OutputPage, PageDraft, PageSummary, Provenance};
use super::types::*;
use super::ModelError;
use crate::analytics;
use crate::gateway::ModuleKind;
use crate::text;

/// Schema id written into every exported session document.
pub const SESSION_SCHEMA: &str = "intentflow/session/v1";

/// Partial goal replacement; `None` fields are left alone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalEdit {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_goal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub writing_domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum IntentEdit {
    Add { text: String },
    Delete { id: IntentId },
    Revise { id: IntentId, text: String },
    ToggleKeep { id: IntentId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DimensionEdit {
    SetSlider { id: DimensionId, value: i64 },
    SetRadio { id: DimensionId, option: String },
    AddTag { id: DimensionId, tag: String },
    RemoveTag { id: DimensionId, tag: String },
}

impl DimensionEdit {
    pub fn dimension_id(&self) -> DimensionId {
        match self {
            DimensionEdit::SetSlider { id, .. }
            | DimensionEdit::SetRadio { id, .. }
            | DimensionEdit::AddTag { id, .. }
            | DimensionEdit::RemoveTag { id, .. } => *id,
        }
    }
}

/// Result of applying one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelRevision {
    /// Panel revision counter after the event.
    pub revision: u64,
    /// The panel changed in a way that calls for a new page.
    pub regenerate: bool,
    pub action_id: Option<ActionId>,
    pub page_number: Option<u32>,
}

/// The committed result of one pipeline turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targeted_intent: Option<IntentId>,
    pub reply: String,
    pub status_events: Vec<String>,
    pub invoked: Vec<ModuleKind>,
    pub provisional_kind: ActionKind,
    /// Resulting panel when any extractor ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel: Option<PanelSnapshot>,
    pub counters: IdCounters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<PageDraft>,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum SessionEvent {
    TurnCommitted(TurnRecord),
    GoalEdited { edit: GoalEdit, at: DateTime<Utc> },
    IntentEdited { edit: IntentEdit, at: DateTime<Utc> },
    DimensionEdited { edit: DimensionEdit, at: DateTime<Utc> },
    PageAppended { draft: PageDraft },
    RolledBack { page: u32, at: DateTime<Utc> },
    Annotated { action_id: ActionId, kind: ActionKind },
    Telemetry { kind: TelemetryKind, detail: String, at: DateTime<Utc> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    session_id: SessionId,
    goal: Goal,
    intents: Vec<Intent>,
    dimensions: Vec<Dimension>,
    pages: Vec<OutputPage>,
    chat_history: Vec<ChatMessage>,
    action_log: Vec<ActionRecord>,
    #[serde(default)]
    telemetry: Vec<TelemetryRecord>,
    turn_counter: u32,
    panel_revision: u64,
    counters: IdCounters,
}

#[derive(Serialize)]
struct SessionDocumentRef<'a> {
    schema: &'static str,
    #[serde(flatten)]
    session: &'a SessionState,
}

#[derive(Deserialize)]
struct SessionDocument {
    schema: String,
    #[serde(flatten)]
    session: SessionState,
}

impl Default for SessionState {
    fn default() -> Self {
        Self::new()
    }
}

impl SessionState {
    /// Empty session with a fresh random id.
    pub fn new() -> Self {
        Self::with_id(SessionId::random())
    }

    pub fn with_id(session_id: SessionId) -> Self {
        SessionState {
            session_id,
            goal: Goal::default(),
            intents: Vec::new(),
            dimensions: Vec::new(),
            pages: Vec::new(),
            chat_history: Vec::new(),
            action_log: Vec::new(),
            telemetry: Vec::new(),
            turn_counter: 0,
            panel_revision: 0,
            counters: IdCounters::default(),
        }
    }

    pub fn session_id(&self) -> &SessionId {
        &self.session_id
    }

    pub fn goal(&self) -> &Goal {
        &self.goal
    }

    pub fn intents(&self) -> &[Intent] {
        &self.intents
    }

    pub fn intent(&self, id: IntentId) -> Option<&Intent> {
        self.intents.iter().find(|i| i.id == id)
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn dimension(&self, id: DimensionId) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.id == id)
    }

    pub fn pages(&self) -> &[OutputPage] {
        &self.pages
    }

    pub fn latest_page(&self) -> Option<&OutputPage> {
        self.pages.last()
    }

    pub fn chat_history(&self) -> &[ChatMessage] {
        &self.chat_history
    }

    pub fn action_log(&self) -> &[ActionRecord] {
        &self.action_log
    }

    pub fn telemetry(&self) -> &[TelemetryRecord] {
        &self.telemetry
    }

    pub fn turn_counter(&self) -> u32 {
        self.turn_counter
    }

    pub fn panel_revision(&self) -> u64 {
        self.panel_revision
    }

    pub fn counters(&self) -> IdCounters {
        self.counters
    }

    /// Deep copy of the live panel.
    pub fn panel(&self) -> PanelSnapshot {
        PanelSnapshot {
            goal: self.goal.clone(),
            intents: self.intents.clone(),
            dimensions: self.dimensions.clone(),
        }
    }

    pub fn page_at(&self, page_number: u32) -> Result<&OutputPage, ModelError> {
        page_number
            .checked_sub(1)
            .and_then(|i| self.pages.get(i as usize))
            .ok_or_else(|| ModelError::NotFound(format!("page {page_number}")))
    }

    pub fn list_pages(&self) -> Vec<PageSummary> {
        self.pages.iter().map(OutputPage::summary).collect()
    }

    /// SHA-256 over the canonical serialization.
    pub fn content_hash(&self) -> String {
        hex_digest(&serde_json::to_vec(self).expect("session serializes"))
    }

    /// Portable document with the session schema id.
    pub fn to_document_json(&self) -> String {
        serde_json::to_string_pretty(&SessionDocumentRef { schema: SESSION_SCHEMA, session: self })
            .expect("session serializes")
    }

    pub fn from_document_json(json: &str) -> Result<Self, ModelError> {
        let doc: SessionDocument = serde_json::from_str(json)
            .map_err(|e| ModelError::Validation(format!("malformed session document: {e}")))?;
        if doc.schema != SESSION_SCHEMA {
            return Err(ModelError::Validation(format!(
                "unsupported session schema {:?}",
                doc.schema
            )));
        }
        Ok(doc.session)
    }

    pub fn apply_goal_edit(&mut self, edit: GoalEdit, at: DateTime<Utc>) -> Result<PanelRevision, ModelError> {
        self.apply(&SessionEvent::GoalEdited { edit, at })
    }

    pub fn apply_intent_edit(&mut self, edit: IntentEdit, at: DateTime<Utc>) -> Result<PanelRevision, ModelError> {
        self.apply(&SessionEvent::IntentEdited { edit, at })
    }

    pub fn apply_dimension_edit(
        &mut self,
        edit: DimensionEdit,
        at: DateTime<Utc>,
    ) -> Result<PanelRevision, ModelError> {
        self.apply(&SessionEvent::DimensionEdited { edit, at })
    }

    /// Appends a page built from the live panel. Links must already be
    /// well-formed; invalid ones refuse the append.
    pub fn append_page(&mut self, draft: PageDraft) -> Result<u32, ModelError> {
        let rev = self.apply(&SessionEvent::PageAppended { draft })?;
        Ok(rev.page_number.expect("append yields a page"))
    }

    pub fn rollback(&mut self, page_number: u32, at: DateTime<Utc>) -> Result<u32, ModelError> {
        let rev = self.apply(&SessionEvent::RolledBack { page: page_number, at })?;
        Ok(rev.page_number.expect("rollback yields a page"))
    }

    pub fn annotate(&mut self, action_id: ActionId, kind: ActionKind) -> Result<PanelRevision, ModelError> {
        self.apply(&SessionEvent::Annotated { action_id, kind })
    }

    pub fn record_telemetry(
        &mut self,
        kind: TelemetryKind,
        detail: impl Into<String>,
        at: DateTime<Utc>,
    ) -> Result<PanelRevision, ModelError> {
        self.apply(&SessionEvent::Telemetry { kind, detail: detail.into(), at })
    }

    /// Applies one event. On error the session is unchanged.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<PanelRevision, ModelError> {
        match event {
            SessionEvent::TurnCommitted(record) => self.commit_turn(record),
            SessionEvent::GoalEdited { edit, at } => self.edit_goal(edit, *at),
            SessionEvent::IntentEdited { edit, at } => self.edit_intent(edit, *at),
            SessionEvent::DimensionEdited { edit, at } => self.edit_dimension(edit, *at),
            SessionEvent::PageAppended { draft } => {
                let n = self.push_page(draft)?;
                Ok(self.revision(false, None, Some(n)))
            }
            SessionEvent::RolledBack { page, at } => self.roll_back(*page, *at),
            SessionEvent::Annotated { action_id, kind } => {
                analytics::annotate(&mut self.action_log, *action_id, *kind)
                    .map_err(ModelError::from)?;
                Ok(self.revision(false, Some(*action_id), None))
            }
            SessionEvent::Telemetry { kind, detail, at } => {
                self.telemetry.push(TelemetryRecord { kind: *kind, timestamp: *at, detail: detail.clone() });
                Ok(self.revision(false, None, None))
            }
        }
    }

    fn revision(&self, regenerate: bool, action_id: Option<ActionId>, page_number: Option<u32>) -> PanelRevision {
        PanelRevision { revision: self.panel_revision, regenerate, action_id, page_number }
    }

    fn bump_panel(&mut self) {
        self.panel_revision += 1;
    }

    fn log_action(
        &mut self,
        kind: ActionKind,
        source: ActionSource,
        payload: String,
        at: DateTime<Utc>,
    ) -> ActionId {
        let auto = source.is_widget();
        let action_id = self.counters.action();
        self.action_log.push(ActionRecord {
            action_id,
            kind,
            source,
            auto_classified: auto,
            annotation_pending: !auto,
            timestamp: at,
            payload,
        });
        action_id
    }

    fn require_goal(&self) -> Result<(), ModelError> {
        if self.turn_counter == 0 {
            Err(ModelError::NoGoal)
        } else {
            Ok(())
        }
    }

    fn edit_goal(&mut self, edit: &GoalEdit, at: DateTime<Utc>) -> Result<PanelRevision, ModelError> {
        self.require_goal()?;
        let mut goal = self.goal.clone();
        for (name, value, slot) in [
            ("task_goal", &edit.task_goal, &mut goal.task_goal),
            ("writing_domain", &edit.writing_domain, &mut goal.writing_domain),
            ("topic", &edit.topic, &mut goal.topic),
        ] {
            if let Some(v) = value {
                *slot = clean_field(name, v)?;
            }
        }
        self.goal = goal;
        self.bump_panel();
        let payload = serde_json::to_string(edit).expect("goal edit serializes");
        let action = analytics::classify_widget_action(analytics::WidgetAction::GoalEdit);
        let id = self.log_action(action, ActionSource::GoalEdit, payload, at);
        Ok(self.revision(true, Some(id), None))
    }

    fn edit_intent(&mut self, edit: &IntentEdit, at: DateTime<Utc>) -> Result<PanelRevision, ModelError> {
        use analytics::WidgetAction as W;
        let payload = serde_json::to_string(edit).expect("intent edit serializes");
        match edit {
            IntentEdit::Add { text } => {
                let text = clean_field("intent text", text)?;
                if self.intents.len() >= MAX_INTENTS {
                    return Err(ModelError::Validation(format!(
                        "at most {MAX_INTENTS} intents may be kept on the panel"
                    )));
                }
                let id = self.counters.intent();
                self.intents.push(Intent {
                    id,
                    text,
                    kept: false,
                    origin: IntentOrigin::UserAdded,
                    created_turn: self.turn_counter,
                });
                self.bump_panel();
                let kind = analytics::classify_widget_action(W::IntentAdd);
                let action = self.log_action(kind, ActionSource::IntentWidget, payload, at);
                Ok(self.revision(true, Some(action), None))
            }
            IntentEdit::Delete { id } => {
                let idx = self.intent_index(*id)?;
                self.intents.remove(idx);
                self.bump_panel();
                let kind = analytics::classify_widget_action(W::IntentDelete);
                let action = self.log_action(kind, ActionSource::IntentWidget, payload, at);
                Ok(self.revision(true, Some(action), None))
            }
            IntentEdit::Revise { id, text } => {
                let idx = self.intent_index(*id)?;
                let text = clean_field("intent text", text)?;
                let intent = &mut self.intents[idx];
                intent.text = text;
                intent.origin = IntentOrigin::Revised;
                self.bump_panel();
                let kind = analytics::classify_widget_action(W::IntentRevise);
                let action = self.log_action(kind, ActionSource::IntentWidget, payload, at);
                Ok(self.revision(true, Some(action), None))
            }
            IntentEdit::ToggleKeep { id } => {
                let idx = self.intent_index(*id)?;
                let intent = &mut self.intents[idx];
                intent.kept = !intent.kept;
                let detail = format!("{} kept={}", intent.id, intent.kept);
                self.bump_panel();
                self.telemetry.push(TelemetryRecord { kind: TelemetryKind::KeepToggle, timestamp: at, detail });
                Ok(self.revision(false, None, None))
            }
        }
    }

    fn intent_index(&self, id: IntentId) -> Result<usize, ModelError> {
        self.intents
            .iter()
            .position(|i| i.id == id)
            .ok_or_else(|| ModelError::NotFound(format!("{id}")))
    }

    fn edit_dimension(&mut self, edit: &DimensionEdit, at: DateTime<Utc>) -> Result<PanelRevision, ModelError> {
        use analytics::WidgetAction as W;
        let id = edit.dimension_id();
        let idx = self
            .dimensions
            .iter()
            .position(|d| d.id == id)
            .ok_or_else(|| ModelError::NotFound(format!("{id}")))?;
        let mut dim = self.dimensions[idx].clone();
        let widget = match edit {
            DimensionEdit::SetSlider { value, .. } => {
                let next = DimensionValue::Slider(*value);
                super::types::value_in_domain(&dim.domain, &next).map_err(ModelError::Validation)?;
                dim.current = next;
                W::SetSlider
            }
            DimensionEdit::SetRadio { option, .. } => {
                let next = DimensionValue::Radio(option.clone());
                super::types::value_in_domain(&dim.domain, &next).map_err(ModelError::Validation)?;
                dim.current = next;
                W::SetRadio
            }
            DimensionEdit::AddTag { tag, .. } => {
                let tag = normalize_tag(tag).ok_or_else(|| ModelError::Validation("empty tag".into()))?;
                let (DimensionDomain::Hashtag { tags: domain }, DimensionValue::Hashtag(current)) =
                    (&mut dim.domain, &mut dim.current)
                else {
                    return Err(ModelError::Validation(format!("{id} is not a hashtag dimension")));
                };
                if current.contains(&tag) {
                    return Err(ModelError::Validation(format!("tag {tag} already selected")));
                }
                if !domain.contains(&tag) {
                    domain.push(tag.clone());
                }
                current.push(tag);
                W::AddTag
            }
            DimensionEdit::RemoveTag { tag, .. } => {
                let tag = normalize_tag(tag).ok_or_else(|| ModelError::Validation("empty tag".into()))?;
                let DimensionValue::Hashtag(current) = &mut dim.current else {
                    return Err(ModelError::Validation(format!("{id} is not a hashtag dimension")));
                };
                let pos = current
                    .iter()
                    .position(|t| *t == tag)
                    .ok_or_else(|| ModelError::Validation(format!("tag {tag} is not selected")))?;
                current.remove(pos);
                W::RemoveTag
            }
        };
        self.dimensions[idx] = dim;
        self.bump_panel();
        let payload = serde_json::to_string(edit).expect("dimension edit serializes");
        let kind = analytics::classify_widget_action(widget);
        let action = self.log_action(kind, ActionSource::DimensionWidget, payload, at);
        Ok(self.revision(true, Some(action), None))
    }

    fn push_page(&mut self, draft: &PageDraft) -> Result<u32, ModelError> {
        draft
            .document
            .check_offsets()
            .map_err(ModelError::LinkValidation)?;
        let snapshot = self.panel();
        check_links(&draft.links, draft.document.len(), &snapshot)?;
        let page_number = self.pages.len() as u32 + 1;
        self.pages.push(OutputPage {
            page_number,
            document: draft.document.clone(),
            snapshot,
            links: draft.links.clone(),
            provenance: draft.provenance,
            repairs: draft.repairs,
        });
        Ok(page_number)
    }

    fn roll_back(&mut self, page: u32, at: DateTime<Utc>) -> Result<PanelRevision, ModelError> {
        let target = self.page_at(page)?.clone();
        self.goal = target.snapshot.goal.clone();
        self.intents = target.snapshot.intents.clone();
        self.dimensions = target.snapshot.dimensions.clone();
        self.bump_panel();
        let page_number = self.pages.len() as u32 + 1;
        self.pages.push(OutputPage {
            page_number,
            document: target.document,
            snapshot: target.snapshot,
            links: target.links,
            provenance: Provenance::RollbackOf { page },
            repairs: target.repairs,
        });
        let kind = analytics::classify_widget_action(analytics::WidgetAction::Rollback);
        let action = self.log_action(kind, ActionSource::RollbackButton, format!("page {page}"), at);
        Ok(self.revision(false, Some(action), Some(page_number)))
    }

    fn commit_turn(&mut self, record: &TurnRecord) -> Result<PanelRevision, ModelError> {
        if record.prompt.trim().is_empty() {
            return Err(ModelError::Validation("empty prompt".into()));
        }
        let c = record.counters;
        if c.next_intent < self.counters.next_intent
            || c.next_dimension < self.counters.next_dimension
            || c.next_action < self.counters.next_action
        {
            return Err(ModelError::Validation("turn record rewinds id counters".into()));
        }
        if let Some(panel) = &record.panel {
            check_panel(panel, &c)?;
        }
        // Stage the new state so a bad page leaves `self` untouched.
        let mut next = self.clone();
        next.counters = c;
        if let Some(panel) = &record.panel {
            next.goal = panel.goal.clone();
            next.intents = panel.intents.clone();
            next.dimensions = panel.dimensions.clone();
            next.panel_revision += 1;
        }
        let page_number = match &record.page {
            Some(draft) => Some(next.push_page(draft)?),
            None => None,
        };
        next.turn_counter += 1;
        next.chat_history.push(ChatMessage {
            role: ChatRole::User,
            text: record.prompt.clone(),
            targeted_intent: record.targeted_intent,
            status_events: Vec::new(),
        });
        next.chat_history.push(ChatMessage {
            role: ChatRole::Assistant,
            text: record.reply.clone(),
            targeted_intent: None,
            status_events: record.status_events.clone(),
        });
        let source = if record.targeted_intent.is_some() {
            ActionSource::TargetedPrompt
        } else {
            ActionSource::ChatPrompt
        };
        let action = next.log_action(record.provisional_kind, source, record.prompt.clone(), record.at);
        *self = next;
        Ok(self.revision(false, Some(action), page_number))
    }
}

fn clean_field(name: &str, value: &str) -> Result<String, ModelError> {
    if value.chars().any(char::is_control) {
        return Err(ModelError::Validation(format!("{name} contains control characters")));
    }
    let v = value.trim();
    if v.is_empty() {
        return Err(ModelError::Validation(format!("{name} must not be empty")));
    }
    Ok(v.to_string())
}

fn check_links(links: &[Link], doc_len: usize, snapshot: &PanelSnapshot) -> Result<(), ModelError> {
    for link in links {
        link.check(doc_len, snapshot).map_err(ModelError::LinkValidation)?;
    }
    Ok(())
}

/// Structural invariants of a panel produced outside the edit paths.
fn check_panel(panel: &PanelSnapshot, counters: &IdCounters) -> Result<(), ModelError> {
    let bad = |m: String| Err(ModelError::Validation(m));
    if panel.intents.len() > MAX_INTENTS {
        return bad(format!("{} intents exceed the cap", panel.intents.len()));
    }
    if panel.dimensions.len() > MAX_DIMENSIONS {
        return bad(format!("{} dimensions exceed the cap", panel.dimensions.len()));
    }
    let mut ids = BTreeSet::new();
    for i in &panel.intents {
        if !ids.insert(i.id) || i.id.0 >= counters.next_intent {
            return bad(format!("intent id {} duplicated or unallocated", i.id));
        }
        if text::strip_control(&i.text).is_empty() {
            return bad(format!("{} has empty text", i.id));
        }
    }
    let mut dids = BTreeSet::new();
    for d in &panel.dimensions {
        if !dids.insert(d.id) || d.id.0 >= counters.next_dimension {
            return bad(format!("dimension id {} duplicated or unallocated", d.id));
        }
        d.current_in_domain().map_err(ModelError::Validation)?;
    }
    Ok(())
}
