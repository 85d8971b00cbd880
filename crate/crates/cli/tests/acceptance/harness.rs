use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{ensure, Context, Result};
use intentflow_core::gateway::{FixtureProvider, ScriptedProvider};
use intentflow_core::harness::*;
use intentflow_core::{ModuleKind, Provider};
use serde_json::{json, Value};

use crate::common::{data, read};

fn corpus() -> Vec<CorpusEntry> {
    load_corpus(&data().join("corpus.csv")).unwrap()
}

fn scripts() -> Vec<ScriptedProvider> {
    (0..12).map(|i| load_script(&data().join("authoring"), i).unwrap()).collect()
}

fn scripted(scripts: &[ScriptedProvider]) -> StructuralReport {
    let factory = |i: usize, _: &CorpusEntry| Ok(Arc::new(scripts[i].clone()) as Arc<dyn Provider>);
    run_corpus(&corpus(), &factory, &RunOptions::default()).unwrap()
}

fn replay(store: &Path) -> (StructuralReport, Vec<EntryRun>) {
    let p: Arc<dyn Provider> = Arc::new(FixtureProvider::replay(store).unwrap());
    let runs = run_entries(&corpus(), &|_, _| Ok(p.clone()), &RunOptions::default());
    let report = StructuralReport::assemble(CheckConfig::default(), runs.iter().map(|r| r.report.clone()).collect());
    (report, runs)
}

fn verdicts(report: &StructuralReport) -> Vec<BTreeMap<CheckId, Verdict>> {
    report.entries.iter().map(|e| e.checks.iter().map(|(k, v)| (*k, v.verdict)).collect()).collect()
}

/// Checks whose verdict changed, per entry, between two reports.
fn flips(clean: &StructuralReport, dirty: &StructuralReport) -> BTreeMap<usize, Vec<CheckId>> {
    let (a, b) = (verdicts(clean), verdicts(dirty));
    let mut out = BTreeMap::new();
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        let changed: Vec<CheckId> = CheckId::ALL.into_iter().filter(|c| x[c] != y[c]).collect();
        if !changed.is_empty() {
            out.insert(i, changed);
        }
    }
    out
}

fn response_mut(s: &mut ScriptedProvider, kind: ModuleKind) -> &mut Value {
    &mut s.rules.iter_mut().find(|r| r.kind == kind).unwrap().response
}

fn expect_flip(
    name: &str,
    entry: usize,
    want: CheckId,
    clean: &StructuralReport,
    corrupt: impl Fn(&mut ScriptedProvider),
) -> Result<()> {
    let mut s = scripts();
    corrupt(&mut s[entry]);
    let dirty = scripted(&s);
    let got = flips(clean, &dirty);
    let expected = BTreeMap::from([(entry, vec![want])]);
    ensure!(got == expected, "{name} on entry {}: flipped {got:?}, expected {expected:?}", entry + 1);
    ensure!(dirty.entries[entry].checks[&want].verdict == Verdict::Fail, "{name}: {want} did not fail");
    Ok(())
}

pub fn check() -> Result<String> {
    let (report, runs) = replay(&data().join("fixtures/corpus"));
    ensure!(report.all_passed && report.exit_code() == 0, "replay run failed:\n{}", report.render_text());
    let results: usize = report.entries.iter().map(|e| e.checks.len()).sum();
    ensure!(results == 96, "expected 12 x 8 results, got {results}");

    let clean = scripted(&scripts());
    ensure!(flips(&report, &clean).is_empty(), "scripted and replayed verdicts disagree");
    expect_flip("empty topic", 0, CheckId::Q1s, &clean, |s| {
        response_mut(s, ModuleKind::Goal)["topic"] = json!("");
    })?;
    expect_flip("duplicate intents", 2, CheckId::Q3s, &clean, |s| {
        let intents = response_mut(s, ModuleKind::Intent)["intents"].as_array_mut().unwrap();
        let first = intents[0].clone();
        intents.push(first);
    })?;
    expect_flip("out-of-domain slider", 7, CheckId::Q7s, &clean, |s| {
        let dims = response_mut(s, ModuleKind::Dimension)["dimensions"].as_array_mut().unwrap();
        let slider = dims.iter_mut().find(|d| d["ui_kind"] == "slider").unwrap();
        slider["initial"] = json!(["9"]);
    })?;
    expect_flip("bogus quote", 4, CheckId::Q8s, &clean, |s| {
        let rule = s.rules.iter_mut().find(|r| r.kind == ModuleKind::Linking).unwrap();
        rule.response["quotes"].as_array_mut().unwrap().push(json!("a sentence nobody wrote"));
    })?;

    // The same bogus quote written straight into the recorded store.
    let store = tempfile::tempdir()?;
    for e in std::fs::read_dir(data().join("fixtures/corpus"))? {
        let p = e?.path();
        std::fs::copy(&p, store.path().join(p.file_name().unwrap()))?;
    }
    let entry = 10;
    let key = &runs[entry].requests.iter().find(|r| r.kind == ModuleKind::Linking).context("no linking request")?.key;
    let path = store.path().join(format!("{key}.json"));
    let mut fixture: Value = serde_json::from_str(&read(&path))?;
    let mut reply: Value = serde_json::from_str(fixture["response"].as_str().unwrap())?;
    reply["quotes"].as_array_mut().unwrap().push(json!("a sentence nobody wrote"));
    fixture["response"] = json!(reply.to_string());
    std::fs::write(&path, fixture.to_string())?;
    let (dirty, _) = replay(store.path());
    let got = flips(&report, &dirty);
    ensure!(got == BTreeMap::from([(entry, vec![CheckId::Q8s])]), "store corruption flipped {got:?}");
    ensure!(dirty.exit_code() != 0, "corrupted store still exits 0");

    Ok("96/96 checks pass on replay, exit 0; each of 4 corruptions flips only its own check".into())
}
