//! Plain-text renderings of panel state for template variables.

use crate::model::{ChatMessage, ChatRole, Dimension, Goal, Intent, OutputDocument};

pub const NONE: &str = "(none)";

pub fn goal_block(goal: &Goal) -> String {
    if goal == &Goal::default() {
        return "(not set yet)".into();
    }
    format!(
        "Task goal: {}\nWriting domain: {}\nTopic: {}",
        goal.task_goal, goal.writing_domain, goal.topic
    )
}

pub fn intents_block(intents: &[Intent]) -> String {
    if intents.is_empty() {
        return NONE.into();
    }
    intents
        .iter()
        .map(|i| if i.kept { format!("- {} (kept)", i.text) } else { format!("- {}", i.text) })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Exact texts of kept intents, one per line.
pub fn preserve_block(intents: &[Intent]) -> String {
    let kept: Vec<String> = intents.iter().filter(|i| i.kept).map(|i| format!("- {}", i.text)).collect();
    if kept.is_empty() {
        NONE.into()
    } else {
        kept.join("\n")
    }
}

pub fn dimensions_block(dimensions: &[Dimension]) -> String {
    if dimensions.is_empty() {
        return NONE.into();
    }
    dimensions
        .iter()
        .map(|d| {
            let values = d.current.active_values();
            let described: Vec<String> = values
                .iter()
                .map(|v| match d.description(v) {
                    Some(desc) => format!("{v} ({desc})"),
                    None => v.clone(),
                })
                .collect();
            let shown = if described.is_empty() { NONE.to_string() } else { described.join(", ") };
            format!("- {} [{}]: {}", d.title, d.ui_kind(), shown)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn history_block(history: &[ChatMessage], last: usize) -> String {
    let start = history.len().saturating_sub(last);
    let lines: Vec<String> = history[start..]
        .iter()
        .map(|m| {
            let who = match m.role {
                ChatRole::User => "user",
                ChatRole::Assistant => "assistant",
            };
            format!("{who}: {}", m.text)
        })
        .collect();
    if lines.is_empty() {
        NONE.into()
    } else {
        lines.join("\n")
    }
}

pub fn document_block(doc: &OutputDocument) -> String {
    doc.sections()
        .iter()
        .map(|s| match &s.header {
            Some(h) => format!("## {h}\n{}", s.body),
            None => s.body.clone(),
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn quoted_list(quotes: &[String]) -> String {
    quotes.iter().map(|q| format!("- \"{q}\"")).collect::<Vec<_>>().join("\n")
}
