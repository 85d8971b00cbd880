use std::collections::BTreeMap;

use super::context;
use super::{Pipeline, PipelineError, TurnTrace};
use crate::gateway::schema::OutputPayload;
use crate::gateway::ModuleKind;
use crate::model::*;
use crate::text;

/// Why a page is being written; shapes the revision instructions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputRequest<'a> {
    /// First version, from the user's opening request.
    Initial { prompt: &'a str },
    /// Free-form chat follow-up.
    Chat { prompt: &'a str },
    /// Targeted prompt on one intent: the intent's text before and after.
    Targeted { prompt: &'a str, intent: IntentId, before: &'a str },
    /// Panel edit; `change` describes it.
    PanelEdit { change: &'a str },
}

/// Passages of `page` linked to `source`.
fn linked_passages(page: &OutputPage, source: &LinkSource) -> Vec<String> {
    page.links
        .iter()
        .filter(|l| &l.source == source)
        .flat_map(|l| l.spans.iter().map(|s| page.document.slice(*s).to_string()))
        .collect()
}

impl Pipeline {
    pub fn generate_output(
        &self,
        snapshot: &PanelSnapshot,
        previous: Option<&OutputPage>,
        request: &OutputRequest<'_>,
    ) -> Result<OutputDocument, PipelineError> {
        self.output_stage(snapshot, previous, request, &mut TurnTrace::default())
    }

    pub(super) fn output_stage(
        &self,
        snapshot: &PanelSnapshot,
        previous: Option<&OutputPage>,
        request: &OutputRequest<'_>,
        trace: &mut TurnTrace,
    ) -> Result<OutputDocument, PipelineError> {
        let vars = BTreeMap::from([
            ("goal".to_string(), context::goal_block(&snapshot.goal)),
            ("intents".to_string(), context::intents_block(&snapshot.intents)),
            ("preserve".to_string(), context::preserve_block(&snapshot.intents)),
            ("dimensions".to_string(), context::dimensions_block(&snapshot.dimensions)),
            (
                "previous".to_string(),
                previous.map_or("(none; this is the first version)".to_string(), |p| context::document_block(&p.document)),
            ),
            ("instruction".to_string(), instruction(snapshot, previous, request)),
        ]);
        let p: OutputPayload = self.call(ModuleKind::Output, &vars, trace)?;
        let mut sections = Vec::new();
        for (i, s) in p.sections.into_iter().enumerate() {
            let body = s.body.trim().to_string();
            if body.is_empty() {
                trace.defect(format!("output section {i} had an empty body"));
                continue;
            }
            let header = s.header.map(|h| text::strip_control(&h).trim().to_string()).filter(|h| !h.is_empty());
            sections.push(Section { header, body });
        }
        if sections.is_empty() {
            return Err(PipelineError::EmptyOutput);
        }
        Ok(OutputDocument::new(sections))
    }
}

fn instruction(snapshot: &PanelSnapshot, previous: Option<&OutputPage>, request: &OutputRequest<'_>) -> String {
    let mut out = match request {
        OutputRequest::Initial { prompt } => format!("Write the first version for this request: {prompt}"),
        OutputRequest::Chat { prompt } => {
            format!("Revise the previous version to address the user's message: {prompt}")
        }
        OutputRequest::Targeted { prompt, intent, before } => {
            let after = snapshot.intent(*intent).map_or("", |i| i.text.as_str());
            let mut s = format!(
                "The user revised one intent from \"{before}\" to \"{after}\" with this message: {prompt}\nChange only the material that carries this intent and leave the rest of the document unchanged."
            );
            if let Some(page) = previous {
                let passages = linked_passages(page, &LinkSource::Intent { id: *intent });
                if !passages.is_empty() {
                    s.push_str("\nPassages that carry it:\n");
                    s.push_str(&context::quoted_list(&passages));
                }
            }
            s
        }
        OutputRequest::PanelEdit { change } => {
            format!("The user changed the panel ({change}). Update the previous version to match the current settings.")
        }
    };
    if let Some(page) = previous {
        let kept: Vec<String> = snapshot
            .intents
            .iter()
            .filter(|i| i.kept)
            .flat_map(|i| linked_passages(page, &LinkSource::Intent { id: i.id }))
            .collect();
        if !kept.is_empty() {
            out.push_str("\nKeep these passages, which carry kept intents, as they are:\n");
            out.push_str(&context::quoted_list(&kept));
        }
    }
    out
}
