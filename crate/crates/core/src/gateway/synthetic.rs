use serde_json::{json, Value};

use super::{CompletionRequest, GatewayError, ModuleKind, Provider};
use crate::model::hex_digest;
use crate::text;

/// Produces a valid, deterministic payload for any request without a model.
/// The reply depends only on the request key and the seed. Used for fuzzing
/// and benchmarks.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticProvider {
    pub seed: u64,
}

impl SyntheticProvider {
    pub fn new(seed: u64) -> Self {
        SyntheticProvider { seed }
    }

    fn roll(&self, request: &CompletionRequest) -> u64 {
        let h = hex_digest(format!("{}:{}", self.seed, request.key()).as_bytes());
        u64::from_str_radix(&h[..16], 16).expect("hex digest")
    }
}

fn var<'a>(r: &'a CompletionRequest, name: &str) -> &'a str {
    r.context.get(name).map(String::as_str).unwrap_or("")
}

fn words(s: &str) -> Vec<String> {
    text::content_tokens(s).into_iter().collect()
}

impl Provider for SyntheticProvider {
    fn complete(&self, r: &CompletionRequest) -> Result<String, GatewayError> {
        let roll = self.roll(r);
        let prompt = var(r, "prompt");
        let w = words(prompt);
        let word = |i: u64| w.get((i as usize) % w.len().max(1)).cloned().unwrap_or_else(|| "writing".into());
        let payload: Value = match r.kind {
            ModuleKind::Entrypoint => {
                let options: [&[&str]; 5] =
                    [&["intent", "dimension", "output"], &["output"], &[], &["goal"], &["dimension", "output"]];
                let kinds = ["Add", "Delete", "Correct", "Adjust"];
                json!({
                    "reply": format!("Working on: {}", prompt.chars().take(40).collect::<String>()),
                    "invoke": options[(roll % 5) as usize],
                    "provisional_kind": kinds[((roll >> 8) % 4) as usize],
                })
            }
            ModuleKind::Goal => json!({
                "task_goal": format!("Write about {}", word(0)),
                "writing_domain": "General writing",
                "topic": word(roll),
            }),
            ModuleKind::Intent => {
                if !var(r, "targeted_text").is_empty() {
                    json!({"intents": [{"text": format!("{} ({})", var(r, "targeted_text"), word(roll)), "salience": 1.0}]})
                } else {
                    let n = 3 + (roll % 4);
                    let items: Vec<Value> = (0..n)
                        .map(|i| {
                            json!({
                                "text": format!("Emphasize {} in part {}", word(roll >> (i * 4)), i + 1),
                                "salience": ((roll >> (i * 3)) % 100) as f64 / 100.0,
                            })
                        })
                        .collect();
                    json!({"intents": items})
                }
            }
            ModuleKind::Dimension => {
                let mut dims = vec![json!({
                    "title": "Length",
                    "ui_kind": "slider",
                    "domain": ["1", "2", "3", "4", "5"],
                    "initial": [(1 + roll % 5).to_string()],
                    "descriptions": (1..=5).map(|v| json!({"value": v.to_string(), "description": format!("length level {v}")})).collect::<Vec<_>>(),
                })];
                if !roll.is_multiple_of(3) {
                    dims.push(json!({
                        "title": "Focus",
                        "ui_kind": "radio",
                        "domain": ["Overview", "Detail"],
                        "initial": ["Overview"],
                        "descriptions": [
                            {"value": "Overview", "description": "broad summary"},
                            {"value": "Detail", "description": "close reading"},
                        ],
                    }));
                }
                if roll.is_multiple_of(2) {
                    dims.push(json!({
                        "title": "Tone",
                        "ui_kind": "hashtag",
                        "domain": ["#clear", "#warm"],
                        "initial": ["#clear"],
                        "descriptions": [
                            {"value": "#clear", "description": "plain wording"},
                            {"value": "#warm", "description": "friendly wording"},
                        ],
                    }));
                }
                json!({"dimensions": dims})
            }
            ModuleKind::Output => {
                let intents = var(r, "intents");
                let lines: Vec<&str> = intents.lines().filter(|l| !l.trim().is_empty()).collect();
                let mut sections = vec![json!({
                    "header": "Overview",
                    "body": format!("This piece covers {}. {}", var(r, "goal").lines().next().unwrap_or(""), var(r, "dimensions").lines().next().unwrap_or("")),
                })];
                for (i, l) in lines.iter().enumerate() {
                    sections.push(json!({
                        "header": if (roll >> i) & 1 == 1 { Value::Null } else { json!(format!("Part {}", i + 1)) },
                        "body": format!("Following the note \"{}\", this part develops the idea.", l.trim()),
                    }));
                }
                json!({"sections": sections})
            }
            ModuleKind::Linking => {
                let doc = var(r, "document");
                let source = var(r, "source");
                let mut quotes = Vec::new();
                if let Some(line) = source.lines().next().map(str::trim).filter(|l| !l.is_empty()) {
                    if doc.contains(line) {
                        quotes.push(line.to_string());
                    }
                }
                if roll.is_multiple_of(7) {
                    quotes.push("a passage that is not there".to_string());
                }
                if roll.is_multiple_of(5) {
                    if let Some(first) = doc.split(". ").next().filter(|s| !s.is_empty()) {
                        quotes.push(first.to_string());
                    }
                }
                json!({"quotes": quotes})
            }
        };
        Ok(payload.to_string())
    }
}
