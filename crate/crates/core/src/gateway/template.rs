//! Prompt templates, one per module, with `{{name}}` placeholders.

use std::collections::{BTreeMap, BTreeSet};

use super::{GatewayError, ModuleKind};

pub fn template_source(kind: ModuleKind) -> &'static str {
    match kind {
        ModuleKind::Entrypoint => include_str!("../../templates/entrypoint.txt"),
        ModuleKind::Goal => include_str!("../../templates/goal.txt"),
        ModuleKind::Intent => include_str!("../../templates/intent.txt"),
        ModuleKind::Dimension => include_str!("../../templates/dimension.txt"),
        ModuleKind::Output => include_str!("../../templates/output.txt"),
        ModuleKind::Linking => include_str!("../../templates/linking.txt"),
    }
}

/// Placeholder names used by a template.
pub fn template_variables(kind: ModuleKind) -> BTreeSet<&'static str> {
    let mut out = BTreeSet::new();
    let mut rest = template_source(kind);
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                out.insert(after[..close].trim());
                rest = &after[close + 2..];
            }
            None => break,
        }
    }
    out
}

/// Substitutes every placeholder. Values are inserted verbatim and never
/// re-scanned, so a value containing `{{x}}` stays literal.
pub fn render_template(kind: ModuleKind, vars: &BTreeMap<String, String>) -> Result<String, GatewayError> {
    let src = template_source(kind);
    let mut out = String::with_capacity(src.len() + vars.values().map(String::len).sum::<usize>());
    let mut rest = src;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let Some(close) = after.find("}}") else {
            out.push_str(&rest[open..]);
            rest = "";
            break;
        };
        let name = after[..close].trim();
        let value = vars
            .get(name)
            .ok_or_else(|| GatewayError::MissingVariable { kind, name: name.to_string() })?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
