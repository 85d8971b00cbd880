use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use intentflow_core::gateway::{FixtureProvider, Provider, ScriptedProvider};
use intentflow_core::harness::*;
use intentflow_core::ModuleKind;
use proptest::prelude::*;
use serde_json::Value;

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn corpus() -> Vec<CorpusEntry> {
    load_corpus(&data().join("corpus.csv")).unwrap()
}

fn scripts() -> Vec<ScriptedProvider> {
    (0..12).map(|i| load_script(&data().join("authoring"), i).unwrap()).collect()
}

fn run_with(scripts: &[ScriptedProvider], options: &RunOptions) -> StructuralReport {
    let factory = |i: usize, _: &CorpusEntry| Ok(Arc::new(scripts[i].clone()) as Arc<dyn Provider>);
    run_corpus(&corpus(), &factory, options).unwrap()
}

fn verdicts(report: &StructuralReport, entry: usize) -> BTreeMap<CheckId, Verdict> {
    report.entries[entry].checks.iter().map(|(k, v)| (*k, v.verdict)).collect()
}

fn response_mut(script: &mut ScriptedProvider, kind: ModuleKind) -> &mut Value {
    &mut script.rules.iter_mut().find(|r| r.kind == kind).unwrap().response
}

#[test]
fn shipped_corpus_has_two_entries_per_context() {
    let c = corpus();
    assert_eq!(c.len(), 12);
    for ctx in WritingContext::ALL {
        assert_eq!(c.iter().filter(|e| e.writing_context == ctx).count(), 2, "{ctx}");
    }
}

#[test]
fn authored_scripts_pass_every_check() {
    let report = run_with(&scripts(), &RunOptions::default());
    assert!(report.all_passed, "{}", report.render_text());
    assert_eq!(report.exit_code(), 0);
    for e in &report.entries {
        assert_eq!(e.checks.len(), 8);
    }
}

/// Corrupts one field of entry `entry`'s script and returns the checks that
/// changed verdict.
fn flipped(entry: usize, corrupt: impl Fn(&mut ScriptedProvider)) -> (Vec<CheckId>, StructuralReport) {
    let clean = run_with(&scripts(), &RunOptions::default());
    let mut s = scripts();
    corrupt(&mut s[entry]);
    let dirty = run_with(&s, &RunOptions::default());
    let before = verdicts(&clean, entry);
    let after = verdicts(&dirty, entry);
    let changed = CheckId::ALL.into_iter().filter(|c| before[c] != after[c]).collect();
    for i in (0..12).filter(|&i| i != entry) {
        assert_eq!(verdicts(&clean, i), verdicts(&dirty, i), "entry {i} changed");
    }
    (changed, dirty)
}

#[test]
fn empty_topic_flips_only_goal_check() {
    for entry in [0, 6] {
        let (changed, _) = flipped(entry, |s| response_mut(s, ModuleKind::Goal)["topic"] = "".into());
        assert_eq!(changed, vec![CheckId::Q1s], "entry {entry}");
    }
}

#[test]
fn duplicate_intent_flips_only_distinctness_check() {
    for entry in [2, 9] {
        let (changed, dirty) = flipped(entry, |s| {
            let intents = response_mut(s, ModuleKind::Intent)["intents"].as_array_mut().unwrap();
            let copy = intents[0].clone();
            intents.push(copy);
        });
        assert_eq!(changed, vec![CheckId::Q3s], "entry {entry}");
        let evidence = &dirty.entries[entry].checks[&CheckId::Q3s].evidence[0];
        assert!(evidence.contains("intents 0") && evidence.contains("Jaccard 1.000"), "{evidence}");
    }
}

#[test]
fn out_of_domain_slider_flips_only_value_check() {
    for entry in [1, 7] {
        let (changed, _) = flipped(entry, |s| {
            let dims = response_mut(s, ModuleKind::Dimension)["dimensions"].as_array_mut().unwrap();
            let slider = dims.iter_mut().find(|d| d["ui_kind"] == "slider").unwrap();
            slider["initial"] = serde_json::json!(["9"]);
        });
        assert_eq!(changed, vec![CheckId::Q7s], "entry {entry}");
    }
}

#[test]
fn bogus_quote_flips_only_link_check() {
    for entry in [4, 11] {
        let (changed, dirty) = flipped(entry, |s| {
            let rule = s.rules.iter_mut().find(|r| r.kind == ModuleKind::Linking).unwrap();
            rule.response["quotes"].as_array_mut().unwrap().push("a sentence nobody wrote".into());
        });
        assert_eq!(changed, vec![CheckId::Q8s], "entry {entry}");
        let e = &dirty.entries[entry];
        assert!(e.repairs.unlocated_quotes > 0);
        assert!(e.checks[&CheckId::Q8s].evidence.iter().any(|l| l.contains("unlocated_quotes=1")));
    }
}

#[test]
fn failed_entry_is_recorded_and_the_run_continues() {
    let mut s = scripts();
    s[3].rules.retain(|r| r.kind != ModuleKind::Output);
    let report = run_with(&s, &RunOptions::default());
    assert!(report.entries[3].error.is_some());
    assert!(report.entries[3].checks.values().all(|c| c.verdict == Verdict::Fail));
    assert!(report.entries.iter().enumerate().all(|(i, e)| i == 3 || e.passed()));
    assert_eq!(report.exit_code(), 1);
}

#[test]
fn recorded_fixtures_replay_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("fixtures");
    let s = scripts();
    let record = |i: usize, _: &CorpusEntry| {
        let upstream: Arc<dyn Provider> = Arc::new(s[i].clone());
        Ok(Arc::new(FixtureProvider::record(&fixtures, upstream)?) as Arc<dyn Provider>)
    };
    let out_a = dir.path().join("a");
    let recorded = run_corpus(&corpus(), &record, &RunOptions { out_dir: Some(out_a.clone()), ..Default::default() }).unwrap();
    assert!(recorded.all_passed);

    let replay = FixtureProvider::replay(&fixtures).unwrap();
    let shared: Arc<dyn Provider> = Arc::new(replay);
    let replay_factory = |_: usize, _: &CorpusEntry| Ok(shared.clone());
    let out_b = dir.path().join("b");
    let replayed =
        run_corpus(&corpus(), &replay_factory, &RunOptions { out_dir: Some(out_b.clone()), ..Default::default() }).unwrap();
    assert_eq!(recorded.to_json(), replayed.to_json());
    for rel in ["report.json", "report.txt", "sessions/entry-01.json", "sessions/entry-12.json", "requests/entry-07.json"] {
        assert_eq!(std::fs::read(out_a.join(rel)).unwrap(), std::fs::read(out_b.join(rel)).unwrap(), "{rel}");
    }
}

#[test]
fn forms_carry_the_eight_questions_and_the_document() {
    let report = run_with(&scripts(), &RunOptions::default());
    let dir = tempfile::tempdir().unwrap();
    let paths = export_rating_forms(&report, dir.path()).unwrap();
    assert_eq!(paths.len(), 12);
    for (k, p) in paths.iter().enumerate() {
        let form = std::fs::read_to_string(p).unwrap();
        for q in QUESTIONS {
            assert_eq!(form.matches(q).count(), 1, "{q}");
        }
        let doc = &report.entries[k].output.as_ref().unwrap().document;
        assert!(form.contains(doc.as_str()));
    }
}

#[test]
fn empty_report_yields_no_forms() {
    let report = StructuralReport::assemble(CheckConfig::default(), vec![]);
    let dir = tempfile::tempdir().unwrap();
    assert!(export_rating_forms(&report, dir.path()).unwrap().is_empty());
}

#[test]
fn thresholds_are_recorded_in_the_report_header() {
    let mut options = RunOptions::default();
    options.checks.apply_override("q3s.max_jaccard=0.45").unwrap();
    let report = run_with(&scripts(), &options);
    let json: Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["config"]["q3s"]["max_jaccard"], 0.45);
    assert_eq!(json["config"]["q2s"]["max_intents"], 10);
    assert!(report.render_text().contains("0.45"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn disabling_checks_never_changes_other_verdicts(mask in 0u8..=255, corrupt in 0usize..4) {
        let mut s = scripts();
        match corrupt {
            0 => response_mut(&mut s[0], ModuleKind::Goal)["topic"] = "".into(),
            1 => {
                let intents = response_mut(&mut s[0], ModuleKind::Intent)["intents"].as_array_mut().unwrap();
                let copy = intents[1].clone();
                intents.push(copy);
            }
            2 => response_mut(&mut s[0], ModuleKind::Dimension)["dimensions"][0]["initial"] = serde_json::json!(["0"]),
            _ => {}
        }
        let full = run_with(&s, &RunOptions::default());
        let mut options = RunOptions::default();
        for (bit, id) in CheckId::ALL.into_iter().enumerate() {
            if mask & (1 << bit) != 0 {
                options.checks.apply_override(&format!("{}.enabled=false", id.as_str().to_lowercase())).unwrap();
            }
        }
        let partial = run_with(&s, &options);
        for (a, b) in full.entries.iter().zip(&partial.entries) {
            for id in CheckId::ALL {
                if options.checks.enabled(id) {
                    prop_assert_eq!(&a.checks[&id], &b.checks[&id]);
                } else {
                    prop_assert_eq!(b.checks[&id].verdict, Verdict::Skipped);
                }
            }
        }
    }
}
