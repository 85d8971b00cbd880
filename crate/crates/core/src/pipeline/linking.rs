use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Pipeline, PipelineError, TurnTrace};
use crate::gateway::schema::LinkingPayload;
use crate::gateway::ModuleKind;
use crate::links::{locate_quotes, validate_links, ValidatedLinks};
use crate::model::*;

/// What one linking request produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkTrace {
    pub source: LinkSource,
    pub quotes: Vec<String>,
    pub unlocated: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Every linkable source on a panel: each intent, then each active value of
/// each dimension.
pub fn link_sources(snapshot: &PanelSnapshot) -> Vec<(LinkSource, String, String)> {
    let mut out = Vec::new();
    for i in &snapshot.intents {
        out.push((
            LinkSource::Intent { id: i.id },
            i.text.clone(),
            "An intent the user wants the document to follow.".to_string(),
        ));
    }
    for d in &snapshot.dimensions {
        for v in d.current.active_values() {
            let desc = d.description(&v).unwrap_or("A setting chosen by the user.").to_string();
            out.push((
                LinkSource::DimensionValue { dimension: d.id, value: v.clone() },
                format!("{}: {v}", d.title),
                desc,
            ));
        }
    }
    out
}

impl Pipeline {
    /// Links every source to the passages it shaped. One request per
    /// source, issued concurrently; failures are absorbed and counted.
    pub fn link_all(&self, document: &OutputDocument, snapshot: &PanelSnapshot) -> ValidatedLinks {
        self.linking_results(document, snapshot).0
    }

    pub(super) fn linking_stage(
        &self,
        document: &OutputDocument,
        snapshot: &PanelSnapshot,
        trace: &mut TurnTrace,
    ) -> Result<ValidatedLinks, PipelineError> {
        self.check_fault(ModuleKind::Linking)?;
        let (validated, traces) = self.linking_results(document, snapshot);
        for t in &traces {
            if let Some(f) = &t.failure {
                trace.defect(format!("linking {:?} failed: {f}", t.source));
            }
        }
        trace.links = traces;
        Ok(validated)
    }

    fn linking_results(&self, document: &OutputDocument, snapshot: &PanelSnapshot) -> (ValidatedLinks, Vec<LinkTrace>) {
        let sources = link_sources(snapshot);
        if sources.is_empty() || document.is_empty() {
            return (ValidatedLinks { links: Vec::new(), repairs: LinkRepairs::default() }, Vec::new());
        }
        let doc_text = document.canonical_text().to_string();
        let results: Vec<Result<LinkingPayload, String>> = std::thread::scope(|scope| {
            let handles: Vec<_> = sources
                .iter()
                .map(|(source, label, description)| {
                    let kind = match source {
                        LinkSource::Intent { .. } => "intent",
                        LinkSource::DimensionValue { .. } => "dimension value",
                    };
                    let vars = BTreeMap::from([
                        ("document".to_string(), doc_text.clone()),
                        ("source_kind".to_string(), kind.to_string()),
                        ("source".to_string(), label.clone()),
                        ("description".to_string(), description.clone()),
                    ]);
                    scope.spawn(move || {
                        self.gateway
                            .complete_structured(ModuleKind::Linking, &vars)
                            .map_err(|e| e.to_string())
                            .and_then(|r| serde_json::from_value(r.payload).map_err(|e| e.to_string()))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("linking worker panicked".into()))).collect()
        });

        let mut links = Vec::new();
        let mut traces = Vec::new();
        let mut unlocated = 0;
        let mut failed = 0;
        for ((source, _, _), result) in sources.into_iter().zip(results) {
            match result {
                Ok(p) => {
                    let (spans, missing) = locate_quotes(document, &p.quotes);
                    unlocated += missing;
                    traces.push(LinkTrace { source: source.clone(), quotes: p.quotes, unlocated: missing, failure: None });
                    links.push(Link { source, spans });
                }
                Err(e) => {
                    tracing::warn!(?source, error = %e, "linking request failed");
                    failed += 1;
                    traces.push(LinkTrace { source: source.clone(), quotes: Vec::new(), unlocated: 0, failure: Some(e) });
                    links.push(Link { source, spans: Vec::new() });
                }
            }
        }
        let mut validated = validate_links(document, snapshot, links);
        validated.repairs.unlocated_quotes += unlocated;
        validated.repairs.failed_requests += failed;
        (validated, traces)
    }
}
