//! Classification, annotation, and summarization of intent-communication
//! actions recorded in session logs.

mod export;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use export::{export_logs, import_logs, ExportFormat, CSV_COLUMNS};

use crate::model::{ActionId, ActionKind, ActionRecord, SessionId, SessionState, TelemetryKind};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("action {0} not found")]
    NotFound(ActionId),
    #[error("action {0} was already annotated")]
    AlreadyAnnotated(ActionId),
    #[error("{0} is not an annotation choice")]
    NotAnnotatable(ActionKind),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed export: {0}")]
    Format(String),
}

/// Widget-level interactions whose kind is fixed without asking the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetAction {
    IntentAdd,
    IntentDelete,
    IntentRevise,
    GoalEdit,
    SetSlider,
    SetRadio,
    AddTag,
    RemoveTag,
    Rollback,
}

impl WidgetAction {
    pub const ALL: [WidgetAction; 9] = [
        WidgetAction::IntentAdd,
        WidgetAction::IntentDelete,
        WidgetAction::IntentRevise,
        WidgetAction::GoalEdit,
        WidgetAction::SetSlider,
        WidgetAction::SetRadio,
        WidgetAction::AddTag,
        WidgetAction::RemoveTag,
        WidgetAction::Rollback,
    ];
}

pub fn classify_widget_action(action: WidgetAction) -> ActionKind {
    match action {
        WidgetAction::IntentAdd | WidgetAction::AddTag => ActionKind::Add,
        WidgetAction::IntentDelete | WidgetAction::RemoveTag => ActionKind::Delete,
        WidgetAction::IntentRevise
        | WidgetAction::GoalEdit
        | WidgetAction::SetSlider
        | WidgetAction::SetRadio => ActionKind::Adjust,
        WidgetAction::Rollback => ActionKind::Rollback,
    }
}

/// Anything a person can do in the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "detail", rename_all = "snake_case")]
pub enum Interaction {
    Widget(WidgetAction),
    /// Free-form or targeted prompt; its kind comes from annotation.
    Prompt { provisional: ActionKind },
    Telemetry(TelemetryKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Action(ActionKind),
    NonAction(TelemetryKind),
}

pub fn classify_interaction(interaction: Interaction) -> Classification {
    match interaction {
        Interaction::Widget(w) => Classification::Action(classify_widget_action(w)),
        Interaction::Prompt { provisional } => Classification::Action(provisional),
        Interaction::Telemetry(t) => Classification::NonAction(t),
    }
}

/// Replaces the kind of a pending (prompt-sourced) action with a human label.
pub fn annotate(log: &mut [ActionRecord], action_id: ActionId, kind: ActionKind) -> Result<(), AnalyticsError> {
    if !ActionKind::ANNOTATABLE.contains(&kind) {
        return Err(AnalyticsError::NotAnnotatable(kind));
    }
    let record = log
        .iter_mut()
        .find(|r| r.action_id == action_id)
        .ok_or(AnalyticsError::NotFound(action_id))?;
    if !record.annotation_pending {
        return Err(AnalyticsError::AlreadyAnnotated(action_id));
    }
    record.kind = kind;
    record.annotation_pending = false;
    record.auto_classified = false;
    Ok(())
}

/// The action log of one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: SessionId,
    pub actions: Vec<ActionRecord>,
}

impl From<&SessionState> for SessionLog {
    fn from(s: &SessionState) -> Self {
        SessionLog { session_id: s.session_id().clone(), actions: s.action_log().to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; `None` with fewer than two sessions.
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSummary {
    pub sessions: usize,
    pub total: u64,
    /// Actions still awaiting a human label (counted under their provisional kind).
    pub pending_annotation: u64,
    pub counts: BTreeMap<ActionKind, u64>,
    /// Share of `total`, in percent; `None` when there are no actions.
    pub percentages: BTreeMap<ActionKind, Option<f64>>,
    /// Per-session count statistics; `None` when there are no sessions.
    pub per_session: BTreeMap<ActionKind, Option<MeanSd>>,
}

pub fn summarize(logs: &[SessionLog]) -> ActionSummary {
    let mut counts: BTreeMap<ActionKind, u64> = ActionKind::ALL.iter().map(|k| (*k, 0)).collect();
    let mut per_session: BTreeMap<ActionKind, Vec<f64>> =
        ActionKind::ALL.iter().map(|k| (*k, Vec::new())).collect();
    let mut pending = 0;
    for log in logs {
        let mut local: BTreeMap<ActionKind, u64> = BTreeMap::new();
        for a in &log.actions {
            *local.entry(a.kind).or_default() += 1;
            if a.annotation_pending {
                pending += 1;
            }
        }
        for k in ActionKind::ALL {
            let n = local.get(&k).copied().unwrap_or(0);
            *counts.get_mut(&k).unwrap() += n;
            per_session.get_mut(&k).unwrap().push(n as f64);
        }
    }
    let total: u64 = counts.values().sum();
    let percentages = counts
        .iter()
        .map(|(k, n)| (*k, (total > 0).then(|| *n as f64 * 100.0 / total as f64)))
        .collect();
    let per_session = per_session.into_iter().map(|(k, v)| (k, mean_sd(&v))).collect();
    ActionSummary {
        sessions: logs.len(),
        total,
        pending_annotation: pending,
        counts,
        percentages,
        per_session,
    }
}

fn mean_sd(values: &[f64]) -> Option<MeanSd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    });
    Some(MeanSd { mean, sd })
}

impl ActionSummary {
    /// Plain-text table.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "sessions: {}\ntotal actions: {}\npending annotation: {}\n\n{:<10} {:>7} {:>9} {:>8} {:>8}\n",
            self.sessions, self.total, self.pending_annotation, "kind", "count", "percent", "mean", "sd"
        );
        for k in ActionKind::ALL {
            let pct = self.percentages[&k].map_or("-".to_string(), |p| format!("{p:.1}"));
            let (mean, sd) = match self.per_session[&k] {
                Some(ms) => (format!("{:.2}", ms.mean), ms.sd.map_or("-".into(), |s| format!("{s:.2}"))),
                None => ("-".into(), "-".into()),
            };
            out.push_str(&format!("{:<10} {:>7} {:>9} {:>8} {:>8}\n", k.to_string(), self.counts[&k], pct, mean, sd));
        }
        out
    }
}
