use std::cell::Cell;
use std::sync::Arc;

use anyhow::{anyhow, Result};
use intentflow_cli::walkthrough::{self, FIRST_PROMPT, TARGETED_PROMPT};
use intentflow_core::clock::{Clock, SteppingClock};
use intentflow_core::pipeline::{PanelEdit, PipelineOptions};
use intentflow_core::*;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use crate::common::{pipeline_with, runner, walkthrough_script};

const CASES: u32 = 1000;

#[derive(Debug, Clone)]
enum Op {
    Chat(usize),
    Targeted(usize),
    AddIntent(String),
    DeleteIntent(usize),
    ReviseIntent(usize, String),
    Keep(usize),
    Slider(i64),
    Radio(usize),
    Tag(bool, usize),
    Goal(String),
    Rollback(u32),
    Annotate(u64, usize),
}

const PROMPTS: [&str; 4] =
    ["Tighten the wording a little", "What is chlorophyll?", "Change the topic to algae", "Make it shorter"];
const TAGS: [&str; 3] = ["#scientific", "#concise", "#engaging"];
const OPTIONS: [&str; 4] = ["Biological processes", "Environmental impact", "History of discovery", "Nope"];

fn op() -> impl Strategy<Value = Op> {
    let words = "[a-z]{1,8}( [a-z]{1,8}){0,4}";
    prop_oneof![
        3 => (0..PROMPTS.len()).prop_map(Op::Chat),
        1 => (0usize..6).prop_map(Op::Targeted),
        1 => words.prop_map(Op::AddIntent),
        1 => (0usize..6).prop_map(Op::DeleteIntent),
        1 => (0usize..6, words).prop_map(|(i, t)| Op::ReviseIntent(i, t)),
        1 => (0usize..6).prop_map(Op::Keep),
        2 => (0i64..7).prop_map(Op::Slider),
        1 => (0..OPTIONS.len()).prop_map(Op::Radio),
        1 => (any::<bool>(), 0..TAGS.len()).prop_map(|(a, t)| Op::Tag(a, t)),
        1 => "[a-z ]{0,10}".prop_map(Op::Goal),
        3 => (0u32..8).prop_map(Op::Rollback),
        1 => (0u64..8, 0usize..5).prop_map(|(a, k)| Op::Annotate(a, k)),
    ]
}

fn fail(msg: impl Into<String>) -> TestCaseError {
    TestCaseError::fail(msg.into())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond { Ok(()) } else { Err(fail(msg())) }
}

/// Applies `op`, returning the events it committed. Rejected ops return no events.
fn apply(p: &Pipeline, s: &mut SessionState, op: &Op, clock: &SteppingClock) -> Vec<SessionEvent> {
    let intent = |s: &SessionState, i: usize| s.intents().get(i).map_or(IntentId(999), |x| x.id);
    let dim = |s: &SessionState, k: UiKind| s.dimensions().iter().find(|d| d.ui_kind() == k).map_or(DimensionId(999), |d| d.id);
    let edit = match op {
        Op::Chat(i) => return p.run_turn(s, PROMPTS[*i], None, &mut |_| {}).map(|r| vec![r.event]).unwrap_or_default(),
        Op::Targeted(i) => {
            let target = intent(s, *i);
            return p.run_turn(s, TARGETED_PROMPT, Some(target), &mut |_| {}).map(|r| vec![r.event]).unwrap_or_default();
        }
        Op::Rollback(n) => {
            let e = SessionEvent::RolledBack { page: *n, at: clock.now() };
            return s.apply(&e).map(|_| vec![e]).unwrap_or_default();
        }
        Op::Annotate(a, k) => {
            let e = SessionEvent::Annotated { action_id: ActionId(*a), kind: ActionKind::ALL[*k] };
            return s.apply(&e).map(|_| vec![e]).unwrap_or_default();
        }
        Op::AddIntent(t) => PanelEdit::Intent(IntentEdit::Add { text: t.clone() }),
        Op::DeleteIntent(i) => PanelEdit::Intent(IntentEdit::Delete { id: intent(s, *i) }),
        Op::ReviseIntent(i, t) => PanelEdit::Intent(IntentEdit::Revise { id: intent(s, *i), text: t.clone() }),
        Op::Keep(i) => PanelEdit::Intent(IntentEdit::ToggleKeep { id: intent(s, *i) }),
        Op::Slider(v) => PanelEdit::Dimension(DimensionEdit::SetSlider { id: dim(s, UiKind::Slider), value: *v }),
        Op::Radio(o) => {
            PanelEdit::Dimension(DimensionEdit::SetRadio { id: dim(s, UiKind::Radio), option: OPTIONS[*o].into() })
        }
        Op::Tag(add, t) => {
            let (id, tag) = (dim(s, UiKind::Hashtag), TAGS[*t].to_string());
            PanelEdit::Dimension(if *add { DimensionEdit::AddTag { id, tag } } else { DimensionEdit::RemoveTag { id, tag } })
        }
        Op::Goal(t) => PanelEdit::Goal(GoalEdit { topic: Some(t.clone()), ..Default::default() }),
    };
    p.apply_panel_edit(s, edit, &mut |_| {}).map(|r| r.events).unwrap_or_default()
}

fn sequence(p: &Pipeline, seed: &(SessionState, SessionEvent), ops: &[Op], counts: &Cell<[usize; 3]>) -> Result<(), TestCaseError> {
    let clock = SteppingClock::fixed();
    let (mut s, first) = seed.clone();
    let mut log = vec![first];
    for op in ops {
        let before = s.clone();
        let before_pages: Vec<String> = s.pages().iter().map(OutputPage::full_hash).collect();
        let events = apply(p, &mut s, op, &clock);
        if events.is_empty() {
            ensure(s == before, || format!("rejected {op:?} changed the session"))?;
            continue;
        }
        log.extend(events.iter().cloned());
        let after: Vec<String> = s.pages().iter().map(OutputPage::full_hash).collect();
        // Append-only.
        ensure(after.len() >= before_pages.len() && after[..before_pages.len()] == before_pages[..], || {
            format!("{op:?} rewrote earlier pages")
        })?;
        ensure(s.pages().iter().enumerate().all(|(k, pg)| pg.page_number as usize == k + 1), || "page numbers not sequential".into())?;
        if let Op::Rollback(n) = op {
            let target = before.page_at(*n).map_err(|e| fail(e.to_string()))?;
            let latest = s.latest_page().unwrap();
            ensure(latest.content_hash() == target.content_hash(), || format!("rollback to {n} not content-equal"))?;
            ensure(latest.provenance == Provenance::RollbackOf { page: *n }, || "rollback provenance".into())?;
            ensure(s.panel() == target.snapshot, || "rollback did not restore the panel".into())?;
            let mut c = counts.get();
            c[0] += 1;
            counts.set(c);
        }
        // Snapshot isolation: a new page records the panel it was made from.
        if after.len() > before_pages.len() {
            ensure(s.latest_page().unwrap().snapshot == s.panel(), || format!("{op:?}: snapshot differs from panel"))?;
        }
        let mut c = counts.get();
        c[1] += 1;
        c[2] += after.len() - before_pages.len();
        counts.set(c);
    }
    let mut replayed = SessionState::with_id(SessionId(walkthrough::SESSION_ID.into()));
    for e in &log {
        replayed.apply(e).map_err(|e| fail(format!("replay rejected an accepted event: {e}")))?;
    }
    ensure(replayed.content_hash() == s.content_hash(), || "replay hash differs".into())?;
    ensure(replayed.to_document_json() == s.to_document_json(), || "replay document differs".into())?;
    Ok(())
}

pub fn check() -> Result<String> {
    let (p, _) = pipeline_with(Arc::new(walkthrough_script()), PipelineOptions::default());
    let mut s = SessionState::with_id(SessionId(walkthrough::SESSION_ID.into()));
    let first = p.run_turn(&mut s, FIRST_PROMPT, None, &mut |_| {})?.event;
    let seed = (s, first);
    let counts = Cell::new([0usize; 3]);
    let mut r = runner(CASES);
    r.run(&prop::collection::vec(op(), 1..10), |ops| sequence(&p, &seed, &ops, &counts))
        .map_err(|e| anyhow!("{e}"))?;
    let [rollbacks, accepted, pages] = counts.get();
    Ok(format!("{CASES} sequences, {accepted} accepted ops, {pages} new pages, {rollbacks} rollbacks, zero violations"))
}
