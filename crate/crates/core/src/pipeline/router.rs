use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::context;
use super::{Pipeline, PipelineError, TurnTrace};
use crate::gateway::schema::EntrypointPayload;
use crate::gateway::ModuleKind;
use crate::model::{ActionKind, IntentId, SessionState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterDecision {
    pub direct_reply: String,
    /// Stages to run, in pipeline order.
    pub invoke: Vec<ModuleKind>,
    pub status_messages: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targeted_intent: Option<IntentId>,
    pub provisional_kind: ActionKind,
}

impl RouterDecision {
    pub fn invokes(&self, kind: ModuleKind) -> bool {
        self.invoke.contains(&kind)
    }

    /// Whether any of goal, intent, or dimension runs.
    pub fn extracts(&self) -> bool {
        [ModuleKind::Goal, ModuleKind::Intent, ModuleKind::Dimension].iter().any(|k| self.invokes(*k))
    }
}

pub fn status_message(kind: ModuleKind, targeted: bool) -> &'static str {
    match kind {
        ModuleKind::Goal => "Identifying the writing goal",
        ModuleKind::Intent if targeted => "Revising the selected intent",
        ModuleKind::Intent => "Extracting intents",
        ModuleKind::Dimension => "Deriving intent dimensions",
        ModuleKind::Output => "Writing the output",
        ModuleKind::Linking => "Linking intents to the output",
        ModuleKind::Entrypoint => "Reading your message",
    }
}

/// Applies the routing rules to the stages the model asked for.
///
/// The first turn of a session runs every stage; a targeted turn runs intent
/// and output; otherwise goal implies intent, dimension, and output, and
/// any extractor implies output. Baseline mode drops intent and dimension.
pub fn normalize_invoke(
    requested: &BTreeSet<ModuleKind>,
    first_turn: bool,
    targeted: bool,
    baseline: bool,
) -> Vec<ModuleKind> {
    use ModuleKind::*;
    let mut set: BTreeSet<ModuleKind> = if first_turn {
        [Goal, Intent, Dimension, Output].into()
    } else if targeted {
        [Intent, Output].into()
    } else {
        let mut s: BTreeSet<ModuleKind> =
            requested.iter().copied().filter(|k| matches!(k, Goal | Intent | Dimension | Output)).collect();
        if s.contains(&Goal) {
            s.extend([Intent, Dimension, Output]);
        }
        if s.contains(&Intent) || s.contains(&Dimension) {
            s.insert(Output);
        }
        s
    };
    if baseline {
        set.remove(&Intent);
        set.remove(&Dimension);
    }
    set.into_iter().collect()
}

impl Pipeline {
    /// Decides which stages a prompt needs and obtains the direct reply.
    pub fn route_prompt(
        &self,
        session: &SessionState,
        prompt: &str,
        targeted_intent: Option<IntentId>,
    ) -> Result<RouterDecision, PipelineError> {
        self.route(session, prompt, targeted_intent, &mut TurnTrace::default())
    }

    pub(super) fn route(
        &self,
        session: &SessionState,
        prompt: &str,
        targeted_intent: Option<IntentId>,
        trace: &mut TurnTrace,
    ) -> Result<RouterDecision, PipelineError> {
        if prompt.trim().is_empty() {
            return Err(PipelineError::EmptyPrompt);
        }
        let targeted = match targeted_intent {
            Some(id) => Some(session.intent(id).ok_or(PipelineError::UnknownIntent(id))?),
            None => None,
        };
        let vars = BTreeMap::from([
            ("prompt".to_string(), prompt.to_string()),
            ("goal".to_string(), context::goal_block(session.goal())),
            ("intents".to_string(), context::intents_block(session.intents())),
            ("history".to_string(), context::history_block(session.chat_history(), 6)),
            (
                "targeted".to_string(),
                targeted.map_or(context::NONE.to_string(), |i| i.text.clone()),
            ),
        ]);
        let payload: EntrypointPayload = self.call(ModuleKind::Entrypoint, &vars, trace)?;

        let mut requested = BTreeSet::new();
        for name in &payload.invoke {
            match name.parse::<ModuleKind>() {
                Ok(k) if k != ModuleKind::Entrypoint && k != ModuleKind::Linking => {
                    requested.insert(k);
                }
                _ => trace.defect(format!("router asked for unknown stage {name:?}")),
            }
        }
        let provisional_kind = match payload.provisional_kind.parse::<ActionKind>() {
            Ok(k) if ActionKind::ANNOTATABLE.contains(&k) => k,
            _ => {
                trace.defect(format!("router kind {:?} replaced by Adjust", payload.provisional_kind));
                ActionKind::Adjust
            }
        };
        let first_turn = session.turn_counter() == 0;
        let invoke = normalize_invoke(&requested, first_turn, targeted.is_some(), self.options.baseline);
        let mut status_messages: Vec<String> =
            invoke.iter().map(|k| status_message(*k, targeted.is_some()).to_string()).collect();
        if invoke.contains(&ModuleKind::Output) && !self.options.baseline {
            status_messages.push(status_message(ModuleKind::Linking, false).to_string());
        }
        let direct_reply = match payload.reply.trim() {
            "" => {
                trace.defect("router reply was empty".into());
                "Done.".to_string()
            }
            r => r.to_string(),
        };
        Ok(RouterDecision { direct_reply, invoke, status_messages, targeted_intent, provisional_kind })
    }
}
