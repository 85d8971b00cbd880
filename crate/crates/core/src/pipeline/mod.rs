//! Orchestration of the six modules over a session.
//!
//! A turn runs routing, then goal, intent, and dimension extraction in that
//! order, then output generation and linking. Nothing touches the session
//! until every stage has succeeded; the finished turn is committed as one
//! [`SessionEvent::TurnCommitted`].

mod context;
mod extract;
mod linking;
mod output;
mod router;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use extract::{dimension_proposal, NO_DESCRIPTION, UNSPECIFIED};
pub use linking::{link_sources, LinkTrace};
pub use output::OutputRequest;
pub use router::{normalize_invoke, status_message, RouterDecision};

use crate::clock::{Clock, SystemClock};
use crate::gateway::{Gateway, GatewayError, ModuleKind};
use crate::model::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error("unknown intent {0}")]
    UnknownIntent(IntentId),
    #[error("{stage} stage failed: {source}")]
    Gateway { stage: ModuleKind, source: GatewayError },
    #[error("{stage} stage failed: {detail}")]
    Stage { stage: ModuleKind, detail: String },
    #[error("output stage produced no text")]
    EmptyOutput,
    #[error("injected failure at the {0} stage")]
    Injected(ModuleKind),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl PipelineError {
    /// The stage that failed, when the failure came from one.
    pub fn stage(&self) -> Option<ModuleKind> {
        match self {
            PipelineError::Gateway { stage, .. } | PipelineError::Stage { stage, .. } => Some(*stage),
            PipelineError::EmptyOutput => Some(ModuleKind::Output),
            PipelineError::Injected(stage) => Some(*stage),
            _ => None,
        }
    }

    /// Caller mistakes, as opposed to provider or stage failures.
    pub fn is_client_error(&self) -> bool {
        matches!(
            self,
            PipelineError::EmptyPrompt
                | PipelineError::UnknownIntent(_)
                | PipelineError::Model(ModelError::Validation(_) | ModelError::NotFound(_) | ModelError::NoGoal)
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    /// Runs without the intent, dimension, and linking stages.
    pub baseline: bool,
    /// Fails the named stage before it calls the provider. For fault
    /// injection in tests.
    #[serde(skip)]
    pub fail_at: Option<ModuleKind>,
}

/// Everything a turn saw on the way, for evaluation and debugging.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TurnTrace {
    /// Validated payload of each non-linking module call, before repairs.
    pub payloads: BTreeMap<ModuleKind, Value>,
    pub links: Vec<LinkTrace>,
    /// Value defects found in payloads and how they were repaired.
    pub defects: Vec<String>,
}

impl TurnTrace {
    pub fn defect(&mut self, message: String) {
        tracing::debug!(%message, "payload defect repaired");
        self.defects.push(message);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelChanges {
    pub goal_changed: bool,
    pub intents_added: Vec<IntentId>,
    pub intents_removed: Vec<IntentId>,
    pub intents_revised: Vec<IntentId>,
    pub dimensions_added: Vec<DimensionId>,
    pub dimensions_removed: Vec<DimensionId>,
    pub dimensions_changed: Vec<DimensionId>,
}

impl PanelChanges {
    pub fn between(before: &PanelSnapshot, after: &PanelSnapshot) -> Self {
        let mut c = PanelChanges { goal_changed: before.goal != after.goal, ..Default::default() };
        for i in &after.intents {
            match before.intent(i.id) {
                None => c.intents_added.push(i.id),
                Some(old) if old.text != i.text => c.intents_revised.push(i.id),
                _ => {}
            }
        }
        c.intents_removed = before.intents.iter().filter(|i| after.intent(i.id).is_none()).map(|i| i.id).collect();
        for d in &after.dimensions {
            match before.dimension(d.id) {
                None => c.dimensions_added.push(d.id),
                Some(old) if old != d => c.dimensions_changed.push(d.id),
                _ => {}
            }
        }
        c.dimensions_removed =
            before.dimensions.iter().filter(|d| after.dimension(d.id).is_none()).map(|d| d.id).collect();
        c
    }

    pub fn is_empty(&self) -> bool {
        self == &PanelChanges::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub decision: RouterDecision,
    pub new_page: Option<u32>,
    pub panel_changes: PanelChanges,
    pub action_id: Option<ActionId>,
    /// The committed event, for persistence.
    pub event: SessionEvent,
    pub trace: TurnTrace,
}

/// A direct panel manipulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum PanelEdit {
    Goal(GoalEdit),
    Intent(IntentEdit),
    Dimension(DimensionEdit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelEditResult {
    pub revision: PanelRevision,
    pub new_page: Option<u32>,
    /// Applied events in order, for persistence.
    pub events: Vec<SessionEvent>,
    pub trace: TurnTrace,
}

pub struct Pipeline {
    gateway: Arc<Gateway>,
    clock: Arc<dyn Clock>,
    options: PipelineOptions,
}

impl Pipeline {
    pub fn new(gateway: Arc<Gateway>) -> Self {
        Pipeline { gateway, clock: Arc::new(SystemClock), options: PipelineOptions::default() }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_options(mut self, options: PipelineOptions) -> Self {
        self.options = options;
        self
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn options(&self) -> &PipelineOptions {
        &self.options
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    fn check_fault(&self, stage: ModuleKind) -> Result<(), PipelineError> {
        if self.options.fail_at == Some(stage) {
            return Err(PipelineError::Injected(stage));
        }
        Ok(())
    }

    /// One module call: fault check, request, typed payload.
    fn call<T: DeserializeOwned>(
        &self,
        stage: ModuleKind,
        vars: &BTreeMap<String, String>,
        trace: &mut TurnTrace,
    ) -> Result<T, PipelineError> {
        self.check_fault(stage)?;
        let r = self
            .gateway
            .complete_structured(stage, vars)
            .map_err(|source| PipelineError::Gateway { stage, source })?;
        let typed = serde_json::from_value(r.payload.clone())
            .map_err(|e| PipelineError::Stage { stage, detail: e.to_string() })?;
        trace.payloads.insert(stage, r.payload);
        Ok(typed)
    }

    /// Runs one chat turn. On error the session is unchanged. `on_status` is
    /// called before each stage with its status message.
    pub fn run_turn(
        &self,
        session: &mut SessionState,
        prompt: &str,
        targeted_intent: Option<IntentId>,
        on_status: &mut dyn FnMut(&str),
    ) -> Result<TurnResult, PipelineError> {
        let mut trace = TurnTrace::default();
        let decision = self.route(session, prompt, targeted_intent, &mut trace)?;
        let mut statuses = decision.status_messages.iter();
        let mut announce = |on_status: &mut dyn FnMut(&str)| {
            if let Some(m) = statuses.next() {
                on_status(m);
            }
        };

        let before = session.panel();
        let mut counters = session.counters();
        let turn = session.turn_counter() + 1;
        let mut goal = before.goal.clone();
        let mut intents = before.intents.clone();
        let mut dimensions = before.dimensions.clone();

        if decision.invokes(ModuleKind::Goal) {
            announce(on_status);
            goal = self.goal_stage(prompt, &mut trace)?;
        }
        if decision.invokes(ModuleKind::Intent) {
            announce(on_status);
            intents = match targeted_intent {
                Some(target) => self.revise_stage(prompt, &goal, &intents, target, &mut trace)?,
                None => self.intent_stage(prompt, &goal, &intents, turn, &mut counters, &mut trace)?,
            };
        }
        if decision.invokes(ModuleKind::Dimension) {
            announce(on_status);
            if intents.is_empty() {
                trace.defect("no intents to derive dimensions from; stage skipped".into());
            } else {
                dimensions = self.dimension_stage(prompt, &goal, &intents, &dimensions, &mut counters, &mut trace)?;
            }
        }
        let snapshot = PanelSnapshot { goal, intents, dimensions };

        let mut page = None;
        if decision.invokes(ModuleKind::Output) {
            announce(on_status);
            let previous = session.latest_page();
            let (request, provenance) = match (targeted_intent, previous) {
                (_, None) => (OutputRequest::Initial { prompt }, Provenance::Initial),
                (Some(id), Some(_)) => {
                    let before_text = before.intent(id).map_or("", |i| i.text.as_str());
                    (OutputRequest::Targeted { prompt, intent: id, before: before_text }, Provenance::TargetedPrompt)
                }
                (None, Some(_)) => (OutputRequest::Chat { prompt }, Provenance::ChatPrompt),
            };
            let document = self.output_stage(&snapshot, previous, &request, &mut trace)?;
            let (links, repairs) = if self.options.baseline {
                (Vec::new(), LinkRepairs::default())
            } else {
                announce(on_status);
                let v = self.linking_stage(&document, &snapshot, &mut trace)?;
                (v.links, v.repairs)
            };
            page = Some(PageDraft { document, links, provenance, repairs });
        }

        let record = TurnRecord {
            prompt: prompt.to_string(),
            targeted_intent,
            reply: decision.direct_reply.clone(),
            status_events: decision.status_messages.clone(),
            invoked: decision.invoke.clone(),
            provisional_kind: decision.provisional_kind,
            panel: decision.extracts().then(|| snapshot.clone()),
            counters,
            page,
            at: self.clock.now(),
        };
        let event = SessionEvent::TurnCommitted(record);
        let rev = session.apply(&event)?;
        Ok(TurnResult {
            panel_changes: PanelChanges::between(&before, &session.panel()),
            decision,
            new_page: rev.page_number,
            action_id: rev.action_id,
            event,
            trace,
        })
    }

    /// Applies a panel edit and, when it calls for one, writes and links a
    /// new page. Edit and page land together or not at all.
    pub fn apply_panel_edit(
        &self,
        session: &mut SessionState,
        edit: PanelEdit,
        on_status: &mut dyn FnMut(&str),
    ) -> Result<PanelEditResult, PipelineError> {
        let at = self.clock.now();
        let change = serde_json::to_string(&edit).expect("edit serializes");
        let event = match edit {
            PanelEdit::Goal(edit) => SessionEvent::GoalEdited { edit, at },
            PanelEdit::Intent(edit) => SessionEvent::IntentEdited { edit, at },
            PanelEdit::Dimension(edit) => SessionEvent::DimensionEdited { edit, at },
        };
        let mut staged = session.clone();
        let mut revision = staged.apply(&event)?;
        let mut events = vec![event];
        let mut trace = TurnTrace::default();
        let mut new_page = None;
        if revision.regenerate && staged.goal().is_complete() {
            let snapshot = staged.panel();
            on_status(status_message(ModuleKind::Output, false));
            let document = self.output_stage(
                &snapshot,
                staged.latest_page(),
                &OutputRequest::PanelEdit { change: &change },
                &mut trace,
            )?;
            let (links, repairs) = if self.options.baseline {
                (Vec::new(), LinkRepairs::default())
            } else {
                on_status(status_message(ModuleKind::Linking, false));
                let v = self.linking_stage(&document, &snapshot, &mut trace)?;
                (v.links, v.repairs)
            };
            let page_event = SessionEvent::PageAppended {
                draft: PageDraft { document, links, provenance: Provenance::PanelEdit, repairs },
            };
            let page_rev = staged.apply(&page_event)?;
            new_page = page_rev.page_number;
            revision.revision = page_rev.revision;
            events.push(page_event);
        }
        *session = staged;
        Ok(PanelEditResult { revision, new_page, events, trace })
    }
}
