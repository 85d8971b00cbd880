use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CompletionRequest, GatewayError, ModuleKind, Provider};

/// Answers requests from a fixed rule list. Used to author fixture stores
/// and to inject faults in tests.
///
/// A rule matches when its kind equals the request kind and every `when`
/// entry names a template variable (or `attempt`) whose value contains the
/// given substring. The first matching rule wins. A string `response` is
/// returned as raw text; any other JSON value is serialized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedProvider {
    pub rules: Vec<ScriptRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub kind: ModuleKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub when: BTreeMap<String, String>,
    pub response: Value,
}

impl ScriptRule {
    pub fn new(kind: ModuleKind, response: Value) -> Self {
        ScriptRule { kind, when: BTreeMap::new(), response }
    }

    pub fn when(mut self, var: &str, contains: &str) -> Self {
        self.when.insert(var.to_string(), contains.to_string());
        self
    }

    fn matches(&self, request: &CompletionRequest) -> bool {
        self.kind == request.kind
            && self
                .when
                .iter()
                .all(|(k, v)| request.context.get(k).is_some_and(|actual| actual.contains(v.as_str())))
    }
}

impl ScriptedProvider {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        ScriptedProvider { rules }
    }

    pub fn push(&mut self, rule: ScriptRule) -> &mut Self {
        self.rules.push(rule);
        self
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let rule = self
            .rules
            .iter()
            .find(|r| r.matches(request))
            .ok_or_else(|| GatewayError::ProviderUnreachable(format!("no scripted {} response", request.kind)))?;
        Ok(match &rule.response {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }
}
