use std::sync::Arc;

use anyhow::{ensure, Result};
use intentflow_cli::walkthrough;
use intentflow_core::gateway::ScriptRule;
use intentflow_core::pipeline::PipelineOptions;
use intentflow_core::*;
use serde_json::json;

use crate::common::{pipeline_with, walkthrough_script};

/// Cascades through goal, intents, dimensions, output, and linking.
const PROMPT: &str = "Change the topic to algae";
const STAGES: [ModuleKind; 5] =
    [ModuleKind::Goal, ModuleKind::Intent, ModuleKind::Dimension, ModuleKind::Output, ModuleKind::Linking];

fn seeded() -> Result<SessionState> {
    let (p, _) = pipeline_with(Arc::new(walkthrough_script()), PipelineOptions::default());
    walkthrough::first_turn(&p)
}

/// Runs the prompt with a fault at `stage` and checks nothing changed.
fn attempt(stage: ModuleKind, options: PipelineOptions, garbage: bool) -> Result<()> {
    let mut script = walkthrough_script();
    if garbage {
        script.rules.insert(0, ScriptRule::new(stage, json!({"unexpected": [1, 2, 3]})));
    }
    let (p, _) = pipeline_with(Arc::new(script), options);
    let mut s = seeded()?;
    let (hash, doc) = (s.content_hash(), s.to_document_json());
    let err = match p.run_turn(&mut s, PROMPT, None, &mut |_| {}) {
        Ok(_) => anyhow::bail!("{stage}: turn succeeded"),
        Err(e) => e,
    };
    ensure!(err.stage() == Some(stage), "{stage}: failed at {:?} instead", err.stage());
    ensure!(s.content_hash() == hash && s.to_document_json() == doc, "{stage}: session changed");
    Ok(())
}

pub fn check() -> Result<String> {
    let (p, _) = pipeline_with(Arc::new(walkthrough_script()), PipelineOptions::default());
    let mut control = seeded()?;
    let before = control.content_hash();
    p.run_turn(&mut control, PROMPT, None, &mut |_| {})?;
    ensure!(control.content_hash() != before, "control turn changed nothing");

    for stage in STAGES {
        attempt(stage, PipelineOptions { fail_at: Some(stage), ..Default::default() }, false)?;
    }
    for stage in &STAGES[..4] {
        attempt(*stage, PipelineOptions::default(), true)?;
    }
    Ok(format!("{} injected faults and 4 malformed replies, session hash unchanged each time", STAGES.len()))
}
