use std::sync::Arc;

use anyhow::{ensure, Context, Result};
use intentflow_cli::walkthrough::{self, ACADEMIC, KEY_CONCEPTS, LENGTH, QUESTION, TARGETED_PROMPT};
use intentflow_core::gateway::FixtureProvider;
use intentflow_core::pipeline::{PanelEdit, PipelineOptions};
use intentflow_core::*;

use crate::common::{data, pipeline_with};

/// The kept-intents block of an output request.
fn preserve_block(request: &str) -> Option<&str> {
    let start = request.find("MUST-PRESERVE")?;
    let rest = &request[start..];
    let end = rest.find("\nDimension settings:").unwrap_or(rest.len());
    Some(&rest[..end])
}

pub fn check() -> Result<String> {
    let provider = Arc::new(FixtureProvider::replay(data().join("fixtures/walkthrough"))?);
    let (p, gateway) = pipeline_with(provider, PipelineOptions::default());
    let mut s = walkthrough::first_turn(&p)?;
    let kept = walkthrough::intent_id(&s, KEY_CONCEPTS)?;
    p.apply_panel_edit(&mut s, PanelEdit::Intent(IntentEdit::ToggleKeep { id: kept }), &mut |_| {})?;
    ensure!(s.intent(kept).is_some_and(|i| i.kept), "keep toggle did not mark the intent");
    let pages_at_keep = s.pages().len();
    gateway.take_journal();

    let target = walkthrough::intent_id(&s, ACADEMIC)?;
    p.run_turn(&mut s, TARGETED_PROMPT, Some(target), &mut |_| {})?;
    let slider = walkthrough::dimension_id(&s, LENGTH)?;
    p.apply_panel_edit(&mut s, PanelEdit::Dimension(DimensionEdit::SetSlider { id: slider, value: 3 }), &mut |_| {})?;
    p.run_turn(&mut s, QUESTION, None, &mut |_| {})?;

    let line = format!("- {KEY_CONCEPTS}");
    let outputs: Vec<_> = gateway.take_journal().into_iter().filter(|e| e.kind == ModuleKind::Output).collect();
    ensure!(!outputs.is_empty(), "no output requests after the keep");
    for (n, e) in outputs.iter().enumerate() {
        let text = e.text();
        let block = preserve_block(&text).with_context(|| format!("output request {n} has no preserve block"))?;
        ensure!(block.lines().any(|l| l == line), "output request {n} lacks the kept intent:\n{block}");
    }
    let later = &s.pages()[pages_at_keep..];
    ensure!(!later.is_empty(), "no pages after the keep");
    for page in later {
        let i = page
            .snapshot
            .intents
            .iter()
            .find(|i| i.text == KEY_CONCEPTS)
            .with_context(|| format!("page {} snapshot lost the kept intent", page.page_number))?;
        ensure!(i.kept, "page {} snapshot has kept=false", page.page_number);
    }
    Ok(format!("kept intent verbatim in {} output requests and {} later snapshots", outputs.len(), later.len()))
}
