use std::path::{Path, PathBuf};
use std::sync::Arc;

use intentflow_cli::walkthrough;
use intentflow_core::clock::SteppingClock;
use intentflow_core::gateway::ScriptedProvider;
use intentflow_core::pipeline::PipelineOptions;
use intentflow_core::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn walkthrough_script() -> ScriptedProvider {
    walkthrough::load_script(&data().join("authoring/walkthrough.json")).unwrap()
}

pub fn pipeline_with(provider: Arc<dyn Provider>, options: PipelineOptions) -> (Pipeline, Arc<Gateway>) {
    let gateway = Arc::new(Gateway::new(provider, ProviderConfig::default()).with_journal());
    let p = Pipeline::new(gateway.clone()).with_clock(Arc::new(SteppingClock::fixed())).with_options(options);
    (p, gateway)
}

/// A runner with a fixed seed and no failure persistence, so every run
/// explores the same cases.
pub fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

/// Span invariants checked from first principles: in bounds, non-empty, on
/// char boundaries, sorted and disjoint, and the source resolves.
pub fn span_violations(page: &OutputPage) -> Vec<String> {
    let text = page.document.canonical_text();
    let mut out = Vec::new();
    for l in &page.links {
        let resolves = match &l.source {
            LinkSource::Intent { id } => page.snapshot.intent(*id).is_some(),
            LinkSource::DimensionValue { dimension, value } => page
                .snapshot
                .dimension(*dimension)
                .is_some_and(|d| d.domain.values().contains(value) || d.current.active_values().contains(value)),
        };
        if !resolves {
            out.push(format!("page {}: {:?} does not resolve", page.page_number, l.source));
        }
        let mut prev_end = None;
        for s in &l.spans {
            let ok = s.start < s.end
                && s.end <= text.len()
                && text.is_char_boundary(s.start)
                && text.is_char_boundary(s.end)
                && prev_end.is_none_or(|e| e < s.start);
            if !ok {
                out.push(format!("page {}: bad span {}..{} in {:?}", page.page_number, s.start, s.end, l.source));
            }
            prev_end = Some(s.end);
        }
    }
    out
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
