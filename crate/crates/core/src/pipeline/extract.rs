//! Goal, intent, and dimension extraction.
//!
//! Payloads that passed structural validation may still break value rules
//! when the gateway runs in audit mode. Such defects are repaired here in a
//! fixed way and noted in the trace.

use std::collections::{BTreeMap, BTreeSet};

use super::context;
use super::{Pipeline, PipelineError, TurnTrace};
use crate::gateway::schema::{DimensionItem, DimensionPayload, GoalPayload, IntentPayload};
use crate::gateway::ModuleKind;
use crate::model::reconcile::{reconcile_dimensions, reconcile_intents, DimensionProposal, IntentProposal};
use crate::model::*;
use crate::text;

pub const UNSPECIFIED: &str = "(unspecified)";
pub const NO_DESCRIPTION: &str = "(no description)";

const FULL_SCOPE: &str = "List every intent behind the request. Keep the intents already on the panel that still apply, using their exact wording, and add new ones the message calls for.";

impl Pipeline {
    pub fn extract_goal(&self, prompt: &str) -> Result<Goal, PipelineError> {
        self.goal_stage(prompt, &mut TurnTrace::default())
    }

    pub(super) fn goal_stage(&self, prompt: &str, trace: &mut TurnTrace) -> Result<Goal, PipelineError> {
        let vars = BTreeMap::from([("prompt".to_string(), prompt.to_string())]);
        let p: GoalPayload = self.call(ModuleKind::Goal, &vars, trace)?;
        let mut field = |name: &str, v: &str| {
            let v = text::strip_control(v).trim().to_string();
            if v.is_empty() {
                trace.defect(format!("goal {name} was empty"));
                UNSPECIFIED.to_string()
            } else {
                v
            }
        };
        Ok(Goal {
            task_goal: field("task_goal", &p.task_goal),
            writing_domain: field("writing_domain", &p.writing_domain),
            topic: field("topic", &p.topic),
        })
    }

    /// Extracts intents and merges them into `existing`.
    pub fn extract_intents(
        &self,
        prompt: &str,
        goal: &Goal,
        existing: &[Intent],
        turn: u32,
        counters: &mut IdCounters,
    ) -> Result<Vec<Intent>, PipelineError> {
        self.intent_stage(prompt, goal, existing, turn, counters, &mut TurnTrace::default())
    }

    pub(super) fn intent_stage(
        &self,
        prompt: &str,
        goal: &Goal,
        existing: &[Intent],
        turn: u32,
        counters: &mut IdCounters,
        trace: &mut TurnTrace,
    ) -> Result<Vec<Intent>, PipelineError> {
        let vars = BTreeMap::from([
            ("prompt".to_string(), prompt.to_string()),
            ("goal".to_string(), context::goal_block(goal)),
            ("intents".to_string(), context::intents_block(existing)),
            ("scope".to_string(), FULL_SCOPE.to_string()),
        ]);
        let p: IntentPayload = self.call(ModuleKind::Intent, &vars, trace)?;
        let proposals = intent_proposals(&p, trace);
        Ok(reconcile_intents(existing, &proposals, turn, counters))
    }

    /// Rewrites one intent according to a targeted prompt. Every other
    /// intent is returned unchanged.
    pub(super) fn revise_stage(
        &self,
        prompt: &str,
        goal: &Goal,
        existing: &[Intent],
        target: IntentId,
        trace: &mut TurnTrace,
    ) -> Result<Vec<Intent>, PipelineError> {
        let current = existing.iter().find(|i| i.id == target).ok_or(PipelineError::UnknownIntent(target))?;
        let scope = format!(
            "The user selected this intent: \"{}\". Rewrite only that intent as the message asks and return exactly one intent.",
            current.text
        );
        let vars = BTreeMap::from([
            ("prompt".to_string(), prompt.to_string()),
            ("goal".to_string(), context::goal_block(goal)),
            ("intents".to_string(), context::intents_block(existing)),
            ("scope".to_string(), scope),
            ("targeted_text".to_string(), current.text.clone()),
        ]);
        let p: IntentPayload = self.call(ModuleKind::Intent, &vars, trace)?;
        let proposals = intent_proposals(&p, trace);
        if proposals.len() > 1 {
            trace.defect(format!("targeted revision returned {} intents; first used", proposals.len()));
        }
        let revised = proposals.into_iter().next().ok_or_else(|| PipelineError::Stage {
            stage: ModuleKind::Intent,
            detail: "targeted revision returned no intent".into(),
        })?;
        Ok(existing
            .iter()
            .map(|i| {
                if i.id == target {
                    Intent { text: revised.text.trim().to_string(), origin: IntentOrigin::Revised, ..i.clone() }
                } else {
                    i.clone()
                }
            })
            .collect())
    }

    /// Derives dimensions and merges them into `existing`.
    pub fn derive_dimensions(
        &self,
        prompt: &str,
        goal: &Goal,
        intents: &[Intent],
        existing: &[Dimension],
        counters: &mut IdCounters,
    ) -> Result<Vec<Dimension>, PipelineError> {
        self.dimension_stage(prompt, goal, intents, existing, counters, &mut TurnTrace::default())
    }

    pub(super) fn dimension_stage(
        &self,
        prompt: &str,
        goal: &Goal,
        intents: &[Intent],
        existing: &[Dimension],
        counters: &mut IdCounters,
        trace: &mut TurnTrace,
    ) -> Result<Vec<Dimension>, PipelineError> {
        let existing_block = if existing.is_empty() {
            context::NONE.to_string()
        } else {
            existing.iter().map(|d| format!("- {} [{}]", d.title, d.ui_kind())).collect::<Vec<_>>().join("\n")
        };
        let vars = BTreeMap::from([
            ("prompt".to_string(), prompt.to_string()),
            ("goal".to_string(), context::goal_block(goal)),
            ("intents".to_string(), context::intents_block(intents)),
            ("dimensions".to_string(), existing_block),
        ]);
        let p: DimensionPayload = self.call(ModuleKind::Dimension, &vars, trace)?;
        let proposals: Vec<DimensionProposal> =
            p.dimensions.iter().filter_map(|d| dimension_proposal(d, trace)).collect();
        if proposals.len() > MAX_DIMENSIONS {
            trace.defect(format!("{} dimensions proposed; first {MAX_DIMENSIONS} kept", proposals.len()));
        }
        Ok(reconcile_dimensions(existing, &proposals, counters))
    }
}

fn intent_proposals(p: &IntentPayload, trace: &mut TurnTrace) -> Vec<IntentProposal> {
    let mut out = Vec::new();
    for it in &p.intents {
        let text = text::strip_control(&it.text).trim().to_string();
        if text.is_empty() {
            trace.defect("empty intent dropped".into());
            continue;
        }
        let salience = if it.salience.is_finite() { it.salience.clamp(0.0, 1.0) } else { 0.0 };
        if salience != it.salience {
            trace.defect(format!("salience {} of {text:?} clamped", it.salience));
        }
        out.push(IntentProposal { text, salience });
    }
    out
}

/// Converts one wire dimension into a proposal, repairing value defects.
/// Returns `None` when nothing usable remains.
pub fn dimension_proposal(d: &DimensionItem, trace: &mut TurnTrace) -> Option<DimensionProposal> {
    let title = text::strip_control(&d.title).trim().to_string();
    if title.is_empty() {
        trace.defect("dimension without a title dropped".into());
        return None;
    }
    let mut note = |m: String| trace.defect(format!("dimension {title:?}: {m}"));
    let (domain, initial) = match d.ui_kind.as_str() {
        "slider" => {
            let expected: Vec<String> = (SLIDER_MIN..=SLIDER_MAX).map(|v| v.to_string()).collect();
            let given: Vec<String> = d.domain.iter().map(|v| v.trim().to_string()).collect();
            if given != expected {
                note(format!("slider domain {given:?} replaced by {SLIDER_MIN}..{SLIDER_MAX}"));
            }
            let raw = d.initial.first().map(|v| v.trim()).unwrap_or("");
            let value = match raw.parse::<i64>() {
                Ok(v) if (SLIDER_MIN..=SLIDER_MAX).contains(&v) => v,
                Ok(v) => {
                    let c = v.clamp(SLIDER_MIN, SLIDER_MAX);
                    note(format!("slider value {v} clamped to {c}"));
                    c
                }
                Err(_) => {
                    note(format!("slider value {raw:?} unreadable; {SLIDER_MIN} used"));
                    SLIDER_MIN
                }
            };
            (DimensionDomain::slider(), DimensionValue::Slider(value))
        }
        "radio" => {
            let mut seen = BTreeSet::new();
            let options: Vec<String> = d
                .domain
                .iter()
                .map(|o| text::strip_control(o).trim().to_string())
                .filter(|o| !o.is_empty() && seen.insert(o.clone()))
                .collect();
            if options.is_empty() {
                note("radio without options dropped".into());
                return None;
            }
            let wanted = d.initial.first().map(|v| v.trim().to_string()).unwrap_or_default();
            let value = if options.contains(&wanted) {
                wanted
            } else {
                note(format!("radio value {wanted:?} not an option; {:?} used", options[0]));
                options[0].clone()
            };
            (DimensionDomain::Radio { options }, DimensionValue::Radio(value))
        }
        "hashtag" => {
            let mut tags: Vec<String> = Vec::new();
            for t in d.domain.iter().filter_map(|t| normalize_tag(t)) {
                if !tags.contains(&t) {
                    tags.push(t);
                }
            }
            let mut current: Vec<String> = Vec::new();
            for t in d.initial.iter().filter_map(|t| normalize_tag(t)) {
                if current.contains(&t) {
                    note(format!("tag {t} selected twice"));
                    continue;
                }
                if !tags.contains(&t) {
                    note(format!("selected tag {t} added to the domain"));
                    tags.push(t.clone());
                }
                current.push(t);
            }
            (DimensionDomain::Hashtag { tags }, DimensionValue::Hashtag(current))
        }
        other => {
            note(format!("unknown ui_kind {other:?}; dropped"));
            return None;
        }
    };
    let is_tag = matches!(domain, DimensionDomain::Hashtag { .. });
    let given: BTreeMap<String, String> = d
        .descriptions
        .iter()
        .filter_map(|x| {
            let key = if is_tag { normalize_tag(&x.value)? } else { x.value.trim().to_string() };
            let desc = text::strip_control(&x.description).trim().to_string();
            (!desc.is_empty()).then_some((key, desc))
        })
        .collect();
    let mut value_descriptions = BTreeMap::new();
    for v in domain.values() {
        match given.get(&v) {
            Some(desc) => {
                value_descriptions.insert(v, desc.clone());
            }
            None => {
                note(format!("value {v:?} has no description"));
                value_descriptions.insert(v, NO_DESCRIPTION.to_string());
            }
        }
    }
    Some(DimensionProposal { title, domain, initial, value_descriptions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::schema::ValueDescription;

    fn item(kind: &str, domain: &[&str], initial: &[&str], described: &[&str]) -> DimensionItem {
        DimensionItem {
            title: "T".into(),
            ui_kind: kind.into(),
            domain: domain.iter().map(|s| s.to_string()).collect(),
            initial: initial.iter().map(|s| s.to_string()).collect(),
            descriptions: described
                .iter()
                .map(|v| ValueDescription { value: v.to_string(), description: format!("about {v}") })
                .collect(),
        }
    }

    #[test]
    fn out_of_range_slider_is_clamped_and_noted() {
        let mut t = TurnTrace::default();
        let d = item("slider", &["1", "2", "3", "4", "5"], &["9"], &["1", "2", "3", "4", "5"]);
        let p = dimension_proposal(&d, &mut t).unwrap();
        assert_eq!(p.initial, DimensionValue::Slider(5));
        assert_eq!(t.defects.len(), 1);
    }

    #[test]
    fn missing_descriptions_are_filled() {
        let mut t = TurnTrace::default();
        let d = item("radio", &["Broad", "Deep"], &["Deep"], &["Broad"]);
        let p = dimension_proposal(&d, &mut t).unwrap();
        assert_eq!(p.value_descriptions["Deep"], NO_DESCRIPTION);
        assert_eq!(p.initial, DimensionValue::Radio("Deep".into()));
        assert_eq!(t.defects.len(), 1);
    }

    #[test]
    fn clean_hashtag_has_no_defects() {
        let mut t = TurnTrace::default();
        let d = item("hashtag", &["#clear", "warm"], &["clear"], &["#clear", "#warm"]);
        let p = dimension_proposal(&d, &mut t).unwrap();
        assert_eq!(p.initial, DimensionValue::Hashtag(vec!["#clear".into()]));
        assert_eq!(p.domain, DimensionDomain::Hashtag { tags: vec!["#clear".into(), "#warm".into()] });
        assert!(t.defects.is_empty(), "{:?}", t.defects);
    }

    #[test]
    fn unknown_widget_is_dropped() {
        let mut t = TurnTrace::default();
        assert!(dimension_proposal(&item("dial", &["a"], &["a"], &["a"]), &mut t).is_none());
    }
}
