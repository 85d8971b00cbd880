use std::cell::Cell;
use std::sync::Arc;

use anyhow::{anyhow, ensure, Result};
use intentflow_cli::walkthrough::{self, FIRST_PROMPT};
use intentflow_core::gateway::{FixtureProvider, ScriptRule, ScriptedProvider};
use intentflow_core::harness::{load_corpus, run_entries, RunOptions};
use intentflow_core::pipeline::PipelineOptions;
use intentflow_core::*;
use proptest::prelude::*;
use serde_json::json;

use crate::common::{data, pipeline_with, runner, span_violations, walkthrough_script};

const PAYLOADS: u32 = 200;
const SOURCES: [&str; 8] = [
    "Include key",
    "academic",
    "scientific and concise",
    "chlorophyll",
    "Length of Article",
    "Article focus",
    "#scientific",
    "#concise",
];

fn first_page(script: ScriptedProvider) -> Result<OutputPage> {
    let (p, _) = pipeline_with(Arc::new(script), PipelineOptions::default());
    let mut s = SessionState::new();
    p.run_turn(&mut s, FIRST_PROMPT, None, &mut |_| {})?;
    s.latest_page().cloned().ok_or_else(|| anyhow!("turn produced no page"))
}

/// A substring of `text` between two char positions, in either order.
fn piece(text: &str, a: usize, b: usize) -> String {
    let chars: Vec<char> = text.chars().collect();
    let (lo, hi) = (a % chars.len(), b % chars.len());
    chars[lo.min(hi)..lo.max(hi)].iter().collect()
}

fn malformed(text: String) -> impl Strategy<Value = String> {
    (0u8..10, any::<usize>(), any::<usize>(), any::<usize>(), "[a-z ]{0,12}").prop_map(move |(kind, a, b, c, noise)| {
        match kind {
            0 => format!("{{\"quotes\": [\"{noise}"),
            1 => json!({"quotes": {"a": noise}}).to_string(),
            2 => json!({"quotes": [null, 7, [noise]]}).to_string(),
            3 => json!({"quotes": [format!("{noise} not in the text {a}")]}).to_string(),
            4 => json!({"quotes": ["", " ", "\t\n"]}).to_string(),
            5 => json!({"quotes": [piece(&text, a, b), piece(&text, b, c), piece(&text, a, c), piece(&text, a, b)]}).to_string(),
            6 => format!("Here you go:\n```\n{}\n```", json!({"quotes": [piece(&text, a, b)]})),
            7 => json!({"quotes": [piece(&text, a, b)], "spans": [[5, 1], [0, 1u64 << 40]]}).to_string(),
            8 => json!({"links": [{"quote": piece(&text, a, b)}]}).to_string(),
            _ => json!({"quotes": [format!("{}\u{301}", piece(&text, a, b)), "🌱".repeat(c % 4 + 1)]}).to_string(),
        }
    })
}

pub fn check() -> Result<String> {
    let mut links = 0;
    let mut pages = 0;
    let mut violations = Vec::new();

    let store = Arc::new(FixtureProvider::replay(data().join("fixtures/corpus"))?);
    let corpus = load_corpus(&data().join("corpus.csv"))?;
    let runs = run_entries(&corpus, &|_, _| Ok(store.clone() as Arc<dyn Provider>), &RunOptions::default());
    let walk = walkthrough::run(walkthrough::pipeline(Arc::new(FixtureProvider::replay(data().join("fixtures/walkthrough"))?)))?;
    for s in runs.iter().map(|r| &r.session).chain([&walk]) {
        for page in s.pages() {
            pages += 1;
            links += page.links.len();
            violations.extend(span_violations(page));
        }
    }
    ensure!(pages > 12, "fixtures produced only {pages} pages");
    ensure!(violations.is_empty(), "fixture links: {violations:?}");

    let clean = first_page(walkthrough_script())?;
    let text = clean.document.canonical_text().to_string();
    let repairs = Cell::new(0u32);
    let mut r = runner(PAYLOADS);
    r.run(&(malformed(text), 0..SOURCES.len()), |(raw, which)| {
        let mut script = walkthrough_script();
        script.rules.insert(0, ScriptRule::new(ModuleKind::Linking, json!(raw)).when("source", SOURCES[which]));
        let page = first_page(script).map_err(|e| TestCaseError::fail(format!("turn failed: {e}")))?;
        let v = span_violations(&page);
        prop_assert!(v.is_empty(), "{:?}", v);
        repairs.set(repairs.get() + page.repairs.total());
        Ok(())
    })
    .map_err(|e| anyhow!("{e}"))?;
    ensure!(repairs.get() > 0, "no repairs were counted");
    Ok(format!(
        "{links} links on {pages} fixture pages and {PAYLOADS} malformed payloads, 0 violations, {} repairs counted",
        repairs.get()
    ))
}
