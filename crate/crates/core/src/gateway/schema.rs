//! Response schemas of the six modules.
//!
//! | module | payload |
//! |---|---|
//! | entrypoint | `{reply, invoke: [goal/intent/dimension/output], provisional_kind}` |
//! | goal | `{task_goal, writing_domain, topic}` |
//! | intent | `{intents: [{text, salience}]}` |
//! | dimension | `{dimensions: [{title, ui_kind, domain: [..], initial: [..], descriptions: [{value, description}]}]}` |
//! | output | `{sections: [{header?, body}]}` |
//! | linking | `{quotes: [..]}` |
//!
//! Validation has two levels. Structural validation parses the reply into
//! the typed payload. Semantic validation additionally enforces the value
//! rules (non-empty goal fields, slider domain `1..5`, every domain value
//! described, ...). [`ValidationMode::Strict`] applies both;
//! [`ValidationMode::Audit`] only the first, so that semantic defects reach
//! the pipeline, get repaired there, and stay visible to the evaluation
//! harness.

use std::collections::BTreeSet;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ModuleKind;
use crate::model::{normalize_tag, ActionKind, SLIDER_MAX, SLIDER_MIN};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    #[default]
    Strict,
    Audit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalPayload {
    pub task_goal: String,
    pub writing_domain: String,
    pub topic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentPayload {
    pub intents: Vec<IntentItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentItem {
    pub text: String,
    pub salience: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionPayload {
    pub dimensions: Vec<DimensionItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionItem {
    pub title: String,
    pub ui_kind: String,
    pub domain: Vec<String>,
    pub initial: Vec<String>,
    pub descriptions: Vec<ValueDescription>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueDescription {
    pub value: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPayload {
    pub sections: Vec<SectionItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionItem {
    #[serde(default)]
    pub header: Option<String>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkingPayload {
    pub quotes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrypointPayload {
    pub reply: String,
    pub invoke: Vec<String>,
    pub provisional_kind: String,
}

pub const INVOCABLE: [&str; 4] = ["goal", "intent", "dimension", "output"];

fn strict_object(properties: Value, required: &[&str]) -> Value {
    json!({
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": false,
    })
}

fn string_array() -> Value {
    json!({"type": "array", "items": {"type": "string"}})
}

/// JSON schema for the structured-response request mode.
pub fn json_schema(kind: ModuleKind) -> Value {
    let s = json!({"type": "string"});
    match kind {
        ModuleKind::Entrypoint => strict_object(
            json!({
                "reply": s,
                "invoke": {"type": "array", "items": {"type": "string", "enum": INVOCABLE}},
                "provisional_kind": {"type": "string", "enum": ["Add", "Delete", "Correct", "Adjust"]},
            }),
            &["reply", "invoke", "provisional_kind"],
        ),
        ModuleKind::Goal => strict_object(
            json!({"task_goal": s, "writing_domain": s, "topic": s}),
            &["task_goal", "writing_domain", "topic"],
        ),
        ModuleKind::Intent => strict_object(
            json!({"intents": {"type": "array", "items": strict_object(
                json!({"text": s, "salience": {"type": "number"}}),
                &["text", "salience"],
            )}}),
            &["intents"],
        ),
        ModuleKind::Dimension => strict_object(
            json!({"dimensions": {"type": "array", "items": strict_object(
                json!({
                    "title": s,
                    "ui_kind": {"type": "string", "enum": ["slider", "radio", "hashtag"]},
                    "domain": string_array(),
                    "initial": string_array(),
                    "descriptions": {"type": "array", "items": strict_object(
                        json!({"value": s, "description": s}),
                        &["value", "description"],
                    )},
                }),
                &["title", "ui_kind", "domain", "initial", "descriptions"],
            )}}),
            &["dimensions"],
        ),
        ModuleKind::Output => strict_object(
            json!({"sections": {"type": "array", "items": strict_object(
                json!({"header": {"type": ["string", "null"]}, "body": s}),
                &["header", "body"],
            )}}),
            &["sections"],
        ),
        ModuleKind::Linking => strict_object(json!({"quotes": string_array()}), &["quotes"]),
    }
}

/// Strips a surrounding Markdown code fence, which some models add.
fn unfence(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

fn parse<T: DeserializeOwned + Serialize>(raw: &str) -> Result<Value, String> {
    let typed: T = serde_json::from_str(unfence(raw)).map_err(|e| format!("not a valid payload: {e}"))?;
    Ok(serde_json::to_value(typed).expect("payload serializes"))
}

/// Parses `raw` and checks it against the schema of `kind`.
pub fn validate(kind: ModuleKind, raw: &str, mode: ValidationMode) -> Result<Value, String> {
    let value = match kind {
        ModuleKind::Entrypoint => parse::<EntrypointPayload>(raw),
        ModuleKind::Goal => parse::<GoalPayload>(raw),
        ModuleKind::Intent => parse::<IntentPayload>(raw),
        ModuleKind::Dimension => parse::<DimensionPayload>(raw),
        ModuleKind::Output => parse::<OutputPayload>(raw),
        ModuleKind::Linking => parse::<LinkingPayload>(raw),
    }?;
    if mode == ValidationMode::Strict {
        let problems = semantic_problems(kind, &value);
        if !problems.is_empty() {
            return Err(problems.join("; "));
        }
    }
    Ok(value)
}

pub fn repair_instruction(detail: &str) -> String {
    format!(
        "Your previous reply could not be used: {detail}. Reply again with JSON that follows the required format exactly."
    )
}

fn blank(s: &str) -> bool {
    s.trim().is_empty() || s.chars().any(char::is_control)
}

/// Every semantic rule broken by a structurally valid payload.
pub fn semantic_problems(kind: ModuleKind, value: &Value) -> Vec<String> {
    fn typed<T: DeserializeOwned>(v: &Value) -> T {
        serde_json::from_value(v.clone()).expect("payload was structurally validated")
    }
    match kind {
        ModuleKind::Entrypoint => {
            let p: EntrypointPayload = typed(value);
            let mut out = Vec::new();
            if p.reply.trim().is_empty() {
                out.push("reply is empty".to_string());
            }
            let mut seen = BTreeSet::new();
            for m in &p.invoke {
                if !INVOCABLE.contains(&m.as_str()) {
                    out.push(format!("cannot invoke {m:?}"));
                } else if !seen.insert(m) {
                    out.push(format!("{m:?} listed twice"));
                }
            }
            match p.provisional_kind.parse::<ActionKind>() {
                Ok(k) if ActionKind::ANNOTATABLE.contains(&k) => {}
                _ => out.push(format!("provisional_kind {:?} is not Add/Delete/Correct/Adjust", p.provisional_kind)),
            }
            out
        }
        ModuleKind::Goal => goal_problems(&typed(value)),
        ModuleKind::Intent => {
            let p: IntentPayload = typed(value);
            let mut out = Vec::new();
            for (i, it) in p.intents.iter().enumerate() {
                if blank(&it.text) {
                    out.push(format!("intent {i} has empty text"));
                }
                if !(0.0..=1.0).contains(&it.salience) {
                    out.push(format!("intent {i} salience {} outside 0..1", it.salience));
                }
            }
            out
        }
        ModuleKind::Dimension => {
            let p: DimensionPayload = typed(value);
            p.dimensions
                .iter()
                .flat_map(|d| {
                    let mut v = dimension_shape_problems(d);
                    if v.is_empty() {
                        v = dimension_value_problems(d);
                    }
                    v.into_iter().map(move |m| format!("dimension {:?}: {m}", d.title))
                })
                .collect()
        }
        ModuleKind::Output => {
            let p: OutputPayload = typed(value);
            let mut out = Vec::new();
            if p.sections.is_empty() {
                out.push("no sections".to_string());
            }
            for (i, s) in p.sections.iter().enumerate() {
                if s.body.trim().is_empty() {
                    out.push(format!("section {i} has an empty body"));
                }
            }
            out
        }
        ModuleKind::Linking => Vec::new(),
    }
}

pub fn goal_problems(p: &GoalPayload) -> Vec<String> {
    [("task_goal", &p.task_goal), ("writing_domain", &p.writing_domain), ("topic", &p.topic)]
        .into_iter()
        .filter(|(_, v)| blank(v))
        .map(|(n, _)| format!("{n} is empty"))
        .collect()
}

/// The expected slider domain, as strings.
pub fn slider_domain() -> Vec<String> {
    (SLIDER_MIN..=SLIDER_MAX).map(|v| v.to_string()).collect()
}

/// Domain values in their canonical form (hashtags normalized).
pub fn canonical_domain(d: &DimensionItem) -> Vec<String> {
    if d.ui_kind == "hashtag" {
        d.domain.iter().filter_map(|t| normalize_tag(t)).collect()
    } else {
        d.domain.iter().map(|v| v.trim().to_string()).collect()
    }
}

/// Title, widget kind, and domain well-formedness.
pub fn dimension_shape_problems(d: &DimensionItem) -> Vec<String> {
    let mut out = Vec::new();
    if blank(&d.title) {
        out.push("empty title".to_string());
    }
    let domain = canonical_domain(d);
    let distinct: BTreeSet<&String> = domain.iter().collect();
    match d.ui_kind.as_str() {
        "slider" => {
            if domain != slider_domain() {
                out.push(format!("slider domain {:?} is not {SLIDER_MIN}..{SLIDER_MAX}", d.domain));
            }
        }
        "radio" => {
            if domain.len() < 2 || distinct.len() != domain.len() || domain.iter().any(|o| o.is_empty()) {
                out.push(format!("radio options {:?} must be at least two distinct labels", d.domain));
            }
        }
        "hashtag" => {
            if domain.is_empty() || distinct.len() != domain.len() || domain.len() != d.domain.len() {
                out.push(format!("hashtag domain {:?} must be distinct non-empty tags", d.domain));
            }
        }
        other => out.push(format!("unknown ui_kind {other:?}")),
    }
    out
}

/// Initial value within the domain, and every value described. Assumes the
/// shape is sound.
pub fn dimension_value_problems(d: &DimensionItem) -> Vec<String> {
    let mut out = Vec::new();
    let domain = canonical_domain(d);
    let norm = |v: &str| {
        if d.ui_kind == "hashtag" {
            normalize_tag(v).unwrap_or_default()
        } else {
            v.trim().to_string()
        }
    };
    match d.ui_kind.as_str() {
        "slider" | "radio" => {
            if d.initial.len() != 1 {
                out.push(format!("{} initial values; expected one", d.initial.len()));
            } else if !domain.contains(&norm(&d.initial[0])) {
                out.push(format!("initial value {:?} outside the domain", d.initial[0]));
            }
        }
        _ => {
            let mut seen = BTreeSet::new();
            for t in &d.initial {
                let t = norm(t);
                if !domain.contains(&t) {
                    out.push(format!("initial tag {t:?} not in the domain"));
                }
                if !seen.insert(t.clone()) {
                    out.push(format!("initial tag {t:?} repeated"));
                }
            }
        }
    }
    for v in &domain {
        let described = d.descriptions.iter().any(|x| norm(&x.value) == *v && !blank(&x.description));
        if !described {
            out.push(format!("value {v:?} has no description"));
        }
    }
    out
}
