//! Structural checks, one per evaluation question.
//!
//! Each check looks only at what the first turn produced: the raw module
//! payloads kept in the [`TurnTrace`] (so defects the pipeline repaired are
//! still visible) and, for links, the committed page. Checks never read each
//! other's results.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::schema::{
    dimension_shape_problems, dimension_value_problems, goal_problems, DimensionPayload, GoalPayload, IntentPayload,
};
use crate::gateway::ModuleKind;
use crate::model::{LinkSource, OutputPage};
use crate::pipeline::TurnTrace;
use crate::text::{content_tokens, token_jaccard};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CheckId {
    Q1s,
    Q2s,
    Q3s,
    Q4s,
    Q5s,
    Q6s,
    Q7s,
    Q8s,
}

impl CheckId {
    pub const ALL: [CheckId; 8] =
        [CheckId::Q1s, CheckId::Q2s, CheckId::Q3s, CheckId::Q4s, CheckId::Q5s, CheckId::Q6s, CheckId::Q7s, CheckId::Q8s];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::Q1s => "Q1s",
            CheckId::Q2s => "Q2s",
            CheckId::Q3s => "Q3s",
            CheckId::Q4s => "Q4s",
            CheckId::Q5s => "Q5s",
            CheckId::Q6s => "Q6s",
            CheckId::Q7s => "Q7s",
            CheckId::Q8s => "Q8s",
        }
    }

    /// One-line statement of what the check measures.
    pub fn describe(self) -> &'static str {
        match self {
            CheckId::Q1s => "goal fields non-empty; topic shares a content token with the prompt",
            CheckId::Q2s => "intent count within bounds (count proxy for coverage)",
            CheckId::Q3s => "no intent pair at or above the token-Jaccard threshold",
            CheckId::Q4s => "every intent shares content tokens with prompt and goal",
            CheckId::Q5s => "every dimension title shares content tokens with prompt and intents",
            CheckId::Q6s => "widget kind known and domain well-formed",
            CheckId::Q7s => "initial value within domain; every value described",
            CheckId::Q8s => "links span-valid, enough intents linked, no unlocatable quotes",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CheckId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckId::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown check {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoalCheck {
    pub enabled: bool,
    pub min_topic_overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountCheck {
    pub enabled: bool,
    pub min_intents: usize,
    pub max_intents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistinctCheck {
    pub enabled: bool,
    pub max_jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapCheck {
    pub enabled: bool,
    pub min_shared_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggle {
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkCheck {
    pub enabled: bool,
    pub min_linked_fraction: f64,
    pub max_unlocated_quotes: u32,
}

impl Default for GoalCheck {
    fn default() -> Self {
        GoalCheck { enabled: true, min_topic_overlap: 1 }
    }
}

impl Default for CountCheck {
    fn default() -> Self {
        CountCheck { enabled: true, min_intents: 3, max_intents: 10 }
    }
}

impl Default for DistinctCheck {
    fn default() -> Self {
        DistinctCheck { enabled: true, max_jaccard: 0.6 }
    }
}

impl Default for OverlapCheck {
    fn default() -> Self {
        OverlapCheck { enabled: true, min_shared_tokens: 1 }
    }
}

impl Default for Toggle {
    fn default() -> Self {
        Toggle { enabled: true }
    }
}

impl Default for LinkCheck {
    fn default() -> Self {
        LinkCheck { enabled: true, min_linked_fraction: 0.5, max_unlocated_quotes: 0 }
    }
}

/// Every knob of every check. Serialized into the report header.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "lowercase")]
pub struct CheckConfig {
    pub q1s: GoalCheck,
    pub q2s: CountCheck,
    pub q3s: DistinctCheck,
    pub q4s: OverlapCheck,
    pub q5s: OverlapCheck,
    pub q6s: Toggle,
    pub q7s: Toggle,
    pub q8s: LinkCheck,
}

impl CheckConfig {
    pub fn enabled(&self, id: CheckId) -> bool {
        match id {
            CheckId::Q1s => self.q1s.enabled,
            CheckId::Q2s => self.q2s.enabled,
            CheckId::Q3s => self.q3s.enabled,
            CheckId::Q4s => self.q4s.enabled,
            CheckId::Q5s => self.q5s.enabled,
            CheckId::Q6s => self.q6s.enabled,
            CheckId::Q7s => self.q7s.enabled,
            CheckId::Q8s => self.q8s.enabled,
        }
    }

    /// Sets one knob, e.g. `set("q3s", "max_jaccard", "0.5")`. The value is
    /// parsed as JSON when it can be, else taken as a string.
    pub fn set(&mut self, check: &str, param: &str, value: &str) -> Result<(), String> {
        let id: CheckId = check.parse()?;
        let mut doc = serde_json::to_value(&*self).expect("config serializes");
        let section = doc
            .get_mut(id.as_str().to_ascii_lowercase())
            .and_then(Value::as_object_mut)
            .expect("every check has a section");
        if !section.contains_key(param) {
            let known: Vec<&String> = section.keys().collect();
            return Err(format!("{id} has no parameter {param:?} (known: {known:?})"));
        }
        let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        section.insert(param.to_string(), parsed);
        *self = serde_json::from_value(doc).map_err(|e| format!("{id}.{param}={value}: {e}"))?;
        Ok(())
    }

    /// Applies an override of the form `<check>.<param>=<value>`.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), String> {
        let (path, value) = spec.split_once('=').ok_or_else(|| format!("override {spec:?} lacks '='"))?;
        let (check, param) = path.split_once('.').ok_or_else(|| format!("override {spec:?} lacks '<check>.<param>'"))?;
        self.set(check, param, value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub verdict: Verdict,
    pub evidence: Vec<String>,
}

impl CheckResult {
    fn judge(failures: Vec<String>, pass_note: String) -> Self {
        if failures.is_empty() {
            CheckResult { verdict: Verdict::Pass, evidence: vec![pass_note] }
        } else {
            CheckResult { verdict: Verdict::Fail, evidence: failures }
        }
    }

    fn fail(reason: impl Into<String>) -> Self {
        CheckResult { verdict: Verdict::Fail, evidence: vec![reason.into()] }
    }

    pub fn skipped() -> Self {
        CheckResult { verdict: Verdict::Skipped, evidence: vec!["disabled".into()] }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// What one entry's first turn left behind.
#[derive(Debug, Clone, Copy)]
pub struct CheckInput<'a> {
    pub prompt: &'a str,
    pub trace: &'a TurnTrace,
    pub page: Option<&'a OutputPage>,
}

impl<'a> CheckInput<'a> {
    fn payload<T: serde::de::DeserializeOwned>(&self, kind: ModuleKind) -> Result<T, String> {
        let v = self.trace.payloads.get(&kind).ok_or_else(|| format!("no {kind} payload"))?;
        serde_json::from_value(v.clone()).map_err(|e| format!("{kind} payload unreadable: {e}"))
    }
}

fn shared(a: &BTreeSet<String>, b: &BTreeSet<String>) -> usize {
    a.intersection(b).count()
}

pub fn run_check(id: CheckId, input: &CheckInput<'_>, config: &CheckConfig) -> CheckResult {
    if !config.enabled(id) {
        return CheckResult::skipped();
    }
    let r = match id {
        CheckId::Q1s => q1s(input, &config.q1s),
        CheckId::Q2s => q2s(input, &config.q2s),
        CheckId::Q3s => q3s(input, &config.q3s),
        CheckId::Q4s => q4s(input, &config.q4s),
        CheckId::Q5s => q5s(input, &config.q5s),
        CheckId::Q6s => q6s(input),
        CheckId::Q7s => q7s(input),
        CheckId::Q8s => q8s(input, &config.q8s),
    };
    r.unwrap_or_else(CheckResult::fail)
}

fn q1s(input: &CheckInput<'_>, c: &GoalCheck) -> Result<CheckResult, String> {
    let goal: GoalPayload = input.payload(ModuleKind::Goal)?;
    let mut failures = goal_problems(&goal);
    let overlap: Vec<String> =
        content_tokens(&goal.topic).intersection(&content_tokens(input.prompt)).cloned().collect();
    if overlap.len() < c.min_topic_overlap {
        failures.push(format!(
            "topic {:?} shares {} content token(s) with the prompt; need {}",
            goal.topic,
            overlap.len(),
            c.min_topic_overlap
        ));
    }
    Ok(CheckResult::judge(failures, format!("topic {:?} overlaps the prompt on {overlap:?}", goal.topic)))
}

fn q2s(input: &CheckInput<'_>, c: &CountCheck) -> Result<CheckResult, String> {
    let p: IntentPayload = input.payload(ModuleKind::Intent)?;
    let n = p.intents.iter().filter(|i| !i.text.trim().is_empty()).count();
    let note = format!("{n} intents (bounds {}..={}; count proxy for coverage)", c.min_intents, c.max_intents);
    let failures = if (c.min_intents..=c.max_intents).contains(&n) { Vec::new() } else { vec![note.clone()] };
    Ok(CheckResult::judge(failures, note))
}

fn q3s(input: &CheckInput<'_>, c: &DistinctCheck) -> Result<CheckResult, String> {
    let p: IntentPayload = input.payload(ModuleKind::Intent)?;
    let mut failures = Vec::new();
    let mut max = 0.0f64;
    for (i, a) in p.intents.iter().enumerate() {
        for (j, b) in p.intents.iter().enumerate().skip(i + 1) {
            let s = token_jaccard(&a.text, &b.text);
            max = max.max(s);
            if s >= c.max_jaccard {
                failures.push(format!("intents {i} {:?} and {j} {:?} have Jaccard {s:.3}", a.text, b.text));
            }
        }
    }
    Ok(CheckResult::judge(failures, format!("highest pairwise Jaccard {max:.3} (threshold {})", c.max_jaccard)))
}

fn q4s(input: &CheckInput<'_>, c: &OverlapCheck) -> Result<CheckResult, String> {
    let p: IntentPayload = input.payload(ModuleKind::Intent)?;
    let goal: GoalPayload = input.payload(ModuleKind::Goal)?;
    let mut context = content_tokens(input.prompt);
    for f in [&goal.task_goal, &goal.writing_domain, &goal.topic] {
        context.extend(content_tokens(f));
    }
    let failures = p
        .intents
        .iter()
        .filter(|i| shared(&content_tokens(&i.text), &context) < c.min_shared_tokens)
        .map(|i| format!("intent {:?} shares fewer than {} token(s) with prompt and goal", i.text, c.min_shared_tokens))
        .collect();
    Ok(CheckResult::judge(failures, format!("all {} intents overlap prompt and goal", p.intents.len())))
}

fn q5s(input: &CheckInput<'_>, c: &OverlapCheck) -> Result<CheckResult, String> {
    let dims: DimensionPayload = input.payload(ModuleKind::Dimension)?;
    let intents: IntentPayload = input.payload(ModuleKind::Intent)?;
    let mut context = content_tokens(input.prompt);
    for i in &intents.intents {
        context.extend(content_tokens(&i.text));
    }
    let failures = dims
        .dimensions
        .iter()
        .filter(|d| shared(&content_tokens(&d.title), &context) < c.min_shared_tokens)
        .map(|d| format!("dimension {:?} shares fewer than {} token(s) with prompt and intents", d.title, c.min_shared_tokens))
        .collect();
    Ok(CheckResult::judge(failures, format!("all {} dimension titles overlap prompt and intents", dims.dimensions.len())))
}

fn q6s(input: &CheckInput<'_>) -> Result<CheckResult, String> {
    let dims: DimensionPayload = input.payload(ModuleKind::Dimension)?;
    let failures = dims
        .dimensions
        .iter()
        .flat_map(|d| dimension_shape_problems(d).into_iter().map(move |m| format!("dimension {:?}: {m}", d.title)))
        .collect();
    let kinds: Vec<&str> = dims.dimensions.iter().map(|d| d.ui_kind.as_str()).collect();
    Ok(CheckResult::judge(failures, format!("widgets {kinds:?} well-formed")))
}

fn q7s(input: &CheckInput<'_>) -> Result<CheckResult, String> {
    let dims: DimensionPayload = input.payload(ModuleKind::Dimension)?;
    let mut failures = Vec::new();
    let mut judged = 0;
    for d in &dims.dimensions {
        // A malformed domain is the widget check's concern; values cannot be
        // judged against it.
        if !dimension_shape_problems(d).is_empty() {
            continue;
        }
        judged += 1;
        failures.extend(dimension_value_problems(d).into_iter().map(|m| format!("dimension {:?}: {m}", d.title)));
    }
    Ok(CheckResult::judge(failures, format!("{judged} dimension value(s) in domain and described")))
}

fn q8s(input: &CheckInput<'_>, c: &LinkCheck) -> Result<CheckResult, String> {
    let page = input.page.ok_or("no page was written")?;
    let mut failures = Vec::new();
    let doc_len = page.document.len();
    for link in &page.links {
        if let Err(e) = link.check(doc_len, &page.snapshot) {
            failures.push(format!("invalid link: {e}"));
        }
    }
    let intents = &page.snapshot.intents;
    let linked = intents
        .iter()
        .filter(|i| {
            page.links.iter().any(|l| l.source == LinkSource::Intent { id: i.id } && l.spans.iter().any(|s| !s.is_empty()))
        })
        .count();
    let fraction = if intents.is_empty() { 0.0 } else { linked as f64 / intents.len() as f64 };
    if fraction < c.min_linked_fraction {
        failures.push(format!("{linked}/{} intents linked; need {}", intents.len(), c.min_linked_fraction));
    }
    let r = &page.repairs;
    if r.unlocated_quotes > c.max_unlocated_quotes {
        failures.push(format!("{} quote(s) not found in the document; allowed {}", r.unlocated_quotes, c.max_unlocated_quotes));
    }
    let counters = format!(
        "repairs: unlocated_quotes={} unresolved_sources={} dropped_spans={} clamped_spans={} merged_spans={} failed_requests={}",
        r.unlocated_quotes, r.unresolved_sources, r.dropped_spans, r.clamped_spans, r.merged_spans, r.failed_requests
    );
    let mut result = CheckResult::judge(failures, format!("{} links valid; {linked}/{} intents linked", page.links.len(), intents.len()));
    result.evidence.push(counters);
    Ok(result)
}
