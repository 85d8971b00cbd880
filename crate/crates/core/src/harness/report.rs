use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::checks::{CheckConfig, CheckId, CheckResult, Verdict};
use super::corpus::WritingContext;
use crate::model::{LinkRepairs, LinkSource, OutputPage};

pub const REPORT_SCHEMA: &str = "intentflow/structural-report/v1";

/// A dimension as a rater sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionView {
    pub title: String,
    pub ui_kind: String,
    pub domain: Vec<String>,
    pub value: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedIntent {
    pub intent: String,
    pub passages: Vec<String>,
}

/// What the first turn produced, for rating forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryOutput {
    pub task_goal: String,
    pub writing_domain: String,
    pub topic: String,
    pub intents: Vec<String>,
    pub dimensions: Vec<DimensionView>,
    pub document: String,
    pub links: Vec<LinkedIntent>,
}

impl EntryOutput {
    pub fn from_page(page: &OutputPage) -> Self {
        let snap = &page.snapshot;
        EntryOutput {
            task_goal: snap.goal.task_goal.clone(),
            writing_domain: snap.goal.writing_domain.clone(),
            topic: snap.goal.topic.clone(),
            intents: snap.intents.iter().map(|i| i.text.clone()).collect(),
            dimensions: snap
                .dimensions
                .iter()
                .map(|d| DimensionView {
                    title: d.title.clone(),
                    ui_kind: d.ui_kind().as_str().to_string(),
                    domain: d.domain.values(),
                    value: d.current.active_values(),
                })
                .collect(),
            document: page.document.canonical_text().to_string(),
            links: snap
                .intents
                .iter()
                .map(|i| LinkedIntent {
                    intent: i.text.clone(),
                    passages: page
                        .links
                        .iter()
                        .filter(|l| l.source == LinkSource::Intent { id: i.id })
                        .flat_map(|l| l.spans.iter().map(|s| page.document.slice(*s).to_string()))
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryReport {
    pub index: usize,
    pub session_id: String,
    pub writing_context: WritingContext,
    pub task: String,
    pub topic: String,
    pub prompt: String,
    /// Set when the pipeline run itself failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub checks: BTreeMap<CheckId, CheckResult>,
    pub repairs: LinkRepairs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<EntryOutput>,
}

impl EntryReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.values().all(|c| c.verdict != Verdict::Fail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassRate {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Passed over judged (passed + failed); 1.0 when nothing was judged.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub schema: String,
    pub config: CheckConfig,
    pub entries: Vec<EntryReport>,
    pub aggregate: BTreeMap<CheckId, PassRate>,
    pub repairs: LinkRepairs,
    pub all_passed: bool,
}

impl StructuralReport {
    pub fn assemble(config: CheckConfig, entries: Vec<EntryReport>) -> Self {
        let mut aggregate = BTreeMap::new();
        for id in CheckId::ALL {
            let (mut passed, mut failed, mut skipped) = (0, 0, 0);
            for e in &entries {
                match e.checks.get(&id).map(|c| c.verdict) {
                    Some(Verdict::Pass) => passed += 1,
                    Some(Verdict::Skipped) => skipped += 1,
                    _ => failed += 1,
                }
            }
            let judged = passed + failed;
            let rate = if judged == 0 { 1.0 } else { passed as f64 / judged as f64 };
            aggregate.insert(id, PassRate { passed, failed, skipped, rate });
        }
        let mut repairs = LinkRepairs::default();
        for e in &entries {
            repairs.absorb(&e.repairs);
        }
        let all_passed = entries.iter().all(EntryReport::passed);
        StructuralReport { schema: REPORT_SCHEMA.to_string(), config, entries, aggregate, repairs, all_passed }
    }

    /// Process exit code for the run: 0 only if nothing failed.
    pub fn exit_code(&self) -> i32 {
        if self.all_passed {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Structural report ({})", self.schema);
        let _ = writeln!(s, "Configuration:");
        let config = serde_json::to_value(&self.config).expect("config serializes");
        for id in CheckId::ALL {
            let key = id.as_str().to_ascii_lowercase();
            let _ = writeln!(s, "  {id}  {}  {}", id.describe(), config[&key]);
        }
        let _ = writeln!(s);
        for e in &self.entries {
            let status = if e.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "[{status}] {} {} / {} / {}", e.session_id, e.writing_context, e.task, e.topic);
            if let Some(err) = &e.error {
                let _ = writeln!(s, "    error: {err}");
            }
            for (id, c) in &e.checks {
                let v = match c.verdict {
                    Verdict::Pass => "pass",
                    Verdict::Fail => "FAIL",
                    Verdict::Skipped => "skip",
                };
                let _ = writeln!(s, "    {id} {v}: {}", c.evidence.join(" | "));
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Pass rates:");
        for (id, r) in &self.aggregate {
            let _ = writeln!(s, "  {id}  {}/{} ({:.1}%)  skipped {}", r.passed, r.passed + r.failed, r.rate * 100.0, r.skipped);
        }
        let r = &self.repairs;
        let _ = writeln!(
            s,
            "Link repairs: unlocated_quotes={} unresolved_sources={} dropped_spans={} clamped_spans={} merged_spans={} failed_requests={}",
            r.unlocated_quotes, r.unresolved_sources, r.dropped_spans, r.clamped_spans, r.merged_spans, r.failed_requests
        );
        let _ = writeln!(s, "Result: {}", if self.all_passed { "all checks passed" } else { "failures present" });
        s
    }
}
