//! The photosynthesis article scenario: a first prompt, a kept intent, a
//! targeted revision, a shorter length, a question, and a rollback.

use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use intentflow_core::clock::{Clock, SteppingClock};
use intentflow_core::gateway::ScriptedProvider;
use intentflow_core::pipeline::PanelEdit;
use intentflow_core::*;

pub const SESSION_ID: &str = "walkthrough";
pub const FIRST_PROMPT: &str = "Write a scientific and concise article on photosynthesis";
pub const KEY_CONCEPTS: &str = "Include key concepts and processes of photosynthesis";
pub const ACADEMIC: &str = "Ensure the topic adheres to academic writing standards";
pub const HIGH_SCHOOL: &str = "Ensure the topic adheres to high school science standards";
pub const TARGETED_PROMPT: &str = "Make this fit high school science standards instead";
pub const QUESTION: &str = "What is chlorophyll?";
pub const LENGTH: &str = "Length of Article";

pub fn load_script(path: &Path) -> Result<ScriptedProvider> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A pipeline over `provider` with a deterministic clock and a request journal.
pub fn pipeline(provider: Arc<dyn Provider>) -> Pipeline {
    let gateway = Arc::new(Gateway::new(provider, ProviderConfig::default()).with_journal());
    Pipeline::new(gateway).with_clock(Arc::new(SteppingClock::fixed()))
}

pub fn intent_id(s: &SessionState, text: &str) -> Result<IntentId> {
    s.intents().iter().find(|i| i.text == text).map(|i| i.id).with_context(|| format!("no intent {text:?}"))
}

pub fn dimension_id(s: &SessionState, title: &str) -> Result<DimensionId> {
    s.dimensions().iter().find(|d| d.title == title).map(|d| d.id).with_context(|| format!("no dimension {title:?}"))
}

/// Runs the first turn only.
pub fn first_turn(p: &Pipeline) -> Result<SessionState> {
    let mut s = SessionState::with_id(SessionId(SESSION_ID.into()));
    p.run_turn(&mut s, FIRST_PROMPT, None, &mut |_| {})?;
    Ok(s)
}

/// Runs the whole scenario and returns the session.
pub fn run(p: Pipeline) -> Result<SessionState> {
    let mut s = first_turn(&p)?;
    let kept = intent_id(&s, KEY_CONCEPTS)?;
    p.apply_panel_edit(&mut s, PanelEdit::Intent(IntentEdit::ToggleKeep { id: kept }), &mut |_| {})?;
    let target = intent_id(&s, ACADEMIC)?;
    p.run_turn(&mut s, TARGETED_PROMPT, Some(target), &mut |_| {})?;
    let slider = dimension_id(&s, LENGTH)?;
    p.apply_panel_edit(&mut s, PanelEdit::Dimension(DimensionEdit::SetSlider { id: slider, value: 3 }), &mut |_| {})?;
    p.run_turn(&mut s, QUESTION, None, &mut |_| {})?;
    s.apply(&SessionEvent::RolledBack { page: 2, at: SteppingClock::fixed().now() })?;
    Ok(s)
}
