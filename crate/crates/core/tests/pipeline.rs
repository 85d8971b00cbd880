use std::path::PathBuf;
use std::sync::Arc;

use intentflow_core::clock::SteppingClock;
use intentflow_core::gateway::{request_key, FixtureProvider, Message, ScriptRule, ScriptedProvider};
use intentflow_core::pipeline::PipelineOptions;
use intentflow_core::*;
use serde_json::json;
use sha2::{Digest, Sha256};

const FIRST_PROMPT: &str = "Write a scientific and concise article on photosynthesis";
const KEY_CONCEPTS: &str = "Include key concepts and processes of photosynthesis";
const ACADEMIC: &str = "Ensure the topic adheres to academic writing standards";
const HIGH_SCHOOL: &str = "Ensure the topic adheres to high school science standards";
const TARGETED_PROMPT: &str = "Make this fit high school science standards instead";

fn walkthrough() -> ScriptedProvider {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/authoring/walkthrough.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn pipeline_with(provider: impl Provider + 'static, options: PipelineOptions) -> (Pipeline, Arc<Gateway>) {
    let gateway = Arc::new(Gateway::new(Arc::new(provider), ProviderConfig::default()).with_journal());
    let pipeline =
        Pipeline::new(gateway.clone()).with_clock(Arc::new(SteppingClock::fixed())).with_options(options);
    (pipeline, gateway)
}

fn pipeline() -> (Pipeline, Arc<Gateway>) {
    pipeline_with(walkthrough(), PipelineOptions::default())
}

fn intent_id(session: &SessionState, text: &str) -> IntentId {
    session.intents().iter().find(|i| i.text == text).unwrap_or_else(|| panic!("no intent {text:?}")).id
}

fn dimension_id(session: &SessionState, title: &str) -> DimensionId {
    session.dimensions().iter().find(|d| d.title == title).unwrap().id
}

fn assert_links_valid(page: &OutputPage) {
    for l in &page.links {
        l.check(page.document.len(), &page.snapshot).unwrap();
    }
}

fn first_turn(p: &Pipeline) -> SessionState {
    let mut s = SessionState::with_id(SessionId("walkthrough".into()));
    p.run_turn(&mut s, FIRST_PROMPT, None, &mut |_| {}).unwrap();
    s
}

#[test]
fn first_turn_builds_panel_and_linked_page() {
    let (p, _) = pipeline();
    let mut s = SessionState::new();
    let mut statuses = Vec::new();
    let r = p.run_turn(&mut s, FIRST_PROMPT, None, &mut |m| statuses.push(m.to_string())).unwrap();
    assert_eq!(r.new_page, Some(1));
    assert_eq!(statuses.len(), 5);
    assert_eq!(s.goal().topic, "Photosynthesis");
    assert_eq!(s.intents().len(), 4);
    let titles: Vec<&str> = s.dimensions().iter().map(|d| d.title.as_str()).collect();
    assert_eq!(titles, ["Length of Article", "Article focus", "Writing tone"]);
    let page = s.latest_page().unwrap();
    assert_eq!(page.provenance, Provenance::Initial);
    assert_eq!(page.repairs.total(), 0);
    assert_links_valid(page);
    let linked = page.links.iter().find(|l| l.source == LinkSource::Intent { id: intent_id(&s, KEY_CONCEPTS) }).unwrap();
    assert_eq!(page.document.slice(linked.spans[0]), "The light-dependent reactions split water and release oxygen.");
}

#[test]
fn targeted_turn_revises_one_intent_and_its_passage() {
    let (p, _) = pipeline();
    let mut s = first_turn(&p);
    let before = s.panel();
    let target = intent_id(&s, ACADEMIC);
    let r = p.run_turn(&mut s, TARGETED_PROMPT, Some(target), &mut |_| {}).unwrap();
    assert_eq!(r.decision.invoke, vec![ModuleKind::Intent, ModuleKind::Output]);
    assert_eq!(r.panel_changes.intents_revised, vec![target]);
    assert_eq!(s.intent(target).unwrap().text, HIGH_SCHOOL);
    for i in before.intents.iter().filter(|i| i.id != target) {
        assert_eq!(s.intent(i.id), Some(i));
    }
    assert_eq!(s.dimensions(), before.dimensions.as_slice());
    let page = s.latest_page().unwrap();
    assert_eq!(page.provenance, Provenance::TargetedPrompt);
    assert!(page.document.canonical_text().contains("In simple terms"));
    assert!(!page.document.canonical_text().contains("peer-reviewed"));
    assert_links_valid(page);
}

#[test]
fn kept_intent_is_rendered_in_every_later_output_request() {
    let (p, gateway) = pipeline();
    let mut s = first_turn(&p);
    let kept = intent_id(&s, KEY_CONCEPTS);
    let r = p.apply_panel_edit(&mut s, PanelEdit::Intent(IntentEdit::ToggleKeep { id: kept }), &mut |_| {}).unwrap();
    assert_eq!(r.new_page, None);
    gateway.take_journal();

    let target = intent_id(&s, ACADEMIC);
    p.run_turn(&mut s, TARGETED_PROMPT, Some(target), &mut |_| {}).unwrap();
    let slider = dimension_id(&s, "Length of Article");
    let edit = PanelEdit::Dimension(DimensionEdit::SetSlider { id: slider, value: 3 });
    assert_eq!(p.apply_panel_edit(&mut s, edit, &mut |_| {}).unwrap().new_page, Some(3));
    p.run_turn(&mut s, "Tighten the wording a little", None, &mut |_| {}).unwrap();

    let outputs: Vec<_> = gateway.take_journal().into_iter().filter(|e| e.kind == ModuleKind::Output).collect();
    assert_eq!(outputs.len(), 3);
    for e in &outputs {
        let text = e.text();
        let block = text.split("MUST-PRESERVE").nth(1).unwrap().split("Dimension settings").next().unwrap();
        assert!(block.contains(&format!("- {KEY_CONCEPTS}")), "{block}");
        assert!(text.contains("The light-dependent reactions split water and release oxygen."));
    }
    for page in &s.pages()[1..] {
        let i = page.snapshot.intents.iter().find(|i| i.id == kept).unwrap();
        assert!(i.kept);
        assert_eq!(i.text, KEY_CONCEPTS);
    }
    assert!(s.intent(kept).unwrap().kept);
}

#[test]
fn slider_edit_writes_a_shorter_page() {
    let (p, _) = pipeline();
    let mut s = first_turn(&p);
    let slider = dimension_id(&s, "Length of Article");
    let r = p
        .apply_panel_edit(&mut s, PanelEdit::Dimension(DimensionEdit::SetSlider { id: slider, value: 3 }), &mut |_| {})
        .unwrap();
    assert!(r.revision.regenerate);
    let page = s.latest_page().unwrap();
    assert_eq!(page.provenance, Provenance::PanelEdit);
    assert!(page.document.len() < s.pages()[0].document.len());
    assert_eq!(s.dimension(slider).unwrap().current, DimensionValue::Slider(3));
    assert_links_valid(page);
}

#[test]
fn question_gets_reply_without_page() {
    let (p, _) = pipeline();
    let mut s = first_turn(&p);
    let r = p.run_turn(&mut s, "What is the Calvin cycle?", None, &mut |_| {}).unwrap();
    assert_eq!(r.new_page, None);
    assert!(r.decision.invoke.is_empty());
    assert_eq!(s.pages().len(), 1);
    assert!(r.action_id.is_some());
}

#[test]
fn deleted_intent_loses_its_links_on_the_next_page() {
    let (p, _) = pipeline();
    let mut s = first_turn(&p);
    let gone = intent_id(&s, "Explain the role of chlorophyll");
    p.apply_panel_edit(&mut s, PanelEdit::Intent(IntentEdit::Delete { id: gone }), &mut |_| {}).unwrap();
    let page = s.latest_page().unwrap();
    assert_eq!(page.page_number, 2);
    assert!(page.links.iter().all(|l| l.source != LinkSource::Intent { id: gone }));
    assert_links_valid(page);
}

/// Second-turn prompt that invokes the goal stage, so every stage runs.
const CASCADE_PROMPT: &str = "Shift the topic toward algae";

fn failing(stage: ModuleKind) -> (ScriptedProvider, PipelineOptions) {
    let mut script = walkthrough();
    let bad = match stage {
        ModuleKind::Entrypoint => json!({"reply": "", "invoke": "everything"}),
        ModuleKind::Goal => json!({"task_goal": "Write", "writing_domain": "Science", "topic": ""}),
        ModuleKind::Intent => json!({"intents": [{"text": "Cover algae", "salience": 7.0}]}),
        ModuleKind::Dimension => json!({"dimensions": [{"title": "Depth", "ui_kind": "slider", "domain": ["1","2","3","4","5"], "initial": ["9"], "descriptions": []}]}),
        ModuleKind::Output => json!({"sections": []}),
        ModuleKind::Linking => {
            return (script, PipelineOptions { fail_at: Some(ModuleKind::Linking), ..Default::default() });
        }
    };
    let rule = match stage {
        ModuleKind::Entrypoint => ScriptRule::new(stage, bad).when("prompt", "algae"),
        _ => ScriptRule::new(stage, bad),
    };
    script.rules.insert(0, rule);
    (script, PipelineOptions::default())
}

#[test]
fn failure_at_any_stage_leaves_the_session_unchanged() {
    let (p, _) = pipeline();
    let seeded = first_turn(&p);
    for stage in [
        ModuleKind::Entrypoint,
        ModuleKind::Goal,
        ModuleKind::Intent,
        ModuleKind::Dimension,
        ModuleKind::Output,
        ModuleKind::Linking,
    ] {
        let (script, options) = failing(stage);
        let (p, _) = pipeline_with(script, options);
        let mut s = seeded.clone();
        let hash = s.content_hash();
        let err = p.run_turn(&mut s, CASCADE_PROMPT, None, &mut |_| {}).expect_err(stage.as_str());
        assert_eq!(err.stage(), Some(stage), "{err}");
        assert_eq!(s.content_hash(), hash, "{stage}");
        assert_eq!(s, seeded);
    }
}

#[test]
fn cascade_prompt_runs_every_stage_when_nothing_fails() {
    let (p, gateway) = pipeline();
    let mut s = first_turn(&p);
    gateway.take_journal();
    p.run_turn(&mut s, CASCADE_PROMPT, None, &mut |_| {}).unwrap();
    let kinds: std::collections::BTreeSet<ModuleKind> = gateway.take_journal().iter().map(|e| e.kind).collect();
    assert_eq!(kinds.len(), 6);
}

#[test]
fn failed_panel_edit_leaves_the_session_unchanged() {
    let (p, _) = pipeline();
    let seeded = first_turn(&p);
    let (p, _) = pipeline_with(walkthrough(), PipelineOptions { fail_at: Some(ModuleKind::Output), ..Default::default() });
    let mut s = seeded.clone();
    let slider = dimension_id(&s, "Length of Article");
    let edit = PanelEdit::Dimension(DimensionEdit::SetSlider { id: slider, value: 2 });
    assert!(p.apply_panel_edit(&mut s, edit, &mut |_| {}).is_err());
    assert_eq!(s, seeded);
}

#[test]
fn recorded_walkthrough_replays_to_the_same_session() {
    let dir = tempfile::tempdir().unwrap();
    let run = |provider: FixtureProvider| {
        let (p, _) = pipeline_with(provider, PipelineOptions::default());
        let mut s = first_turn(&p);
        let target = intent_id(&s, ACADEMIC);
        p.run_turn(&mut s, TARGETED_PROMPT, Some(target), &mut |_| {}).unwrap();
        s.to_document_json()
    };
    let recorded = run(FixtureProvider::record(dir.path(), Arc::new(walkthrough())).unwrap());
    let replayed = run(FixtureProvider::replay(dir.path()).unwrap());
    assert_eq!(recorded, replayed);
}

#[test]
fn request_key_is_sha256_of_the_canonical_document() {
    let messages = vec![Message::system("You are terse."), Message::user("Say \"hi\"\n")];
    let key = request_key(ModuleKind::Goal, "gpt-4o", &messages);
    let doc = r#"["goal","gpt-4o",[["system","You are terse."],["user","Say \"hi\"\n"]]]"#;
    let expected: String = Sha256::digest(doc.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(key, expected);
    assert_eq!(key, "737627bab6f17ee011beaab351cbd4878679276530bd09f6263c06b6aa93560f");
}
