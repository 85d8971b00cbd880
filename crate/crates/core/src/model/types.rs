use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::text;

/// Inclusive slider bounds used for every slider dimension.
pub const SLIDER_MIN: i64 = 1;
pub const SLIDER_MAX: i64 = 5;

/// Maximum number of intents kept on the panel.
pub const MAX_INTENTS: usize = 10;
/// Maximum number of dimensions kept on the panel.
pub const MAX_DIMENSIONS: usize = 7;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub task_goal: String,
    pub writing_domain: String,
    pub topic: String,
}

impl Goal {
    pub fn is_complete(&self) -> bool {
        !self.task_goal.trim().is_empty()
            && !self.writing_domain.trim().is_empty()
            && !self.topic.trim().is_empty()
    }
}

macro_rules! id_newtype {
    ($name:ident, $inner:ty, $prefix:literal) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_newtype!(IntentId, u32, "intent#");
id_newtype!(DimensionId, u32, "dimension#");
id_newtype!(ActionId, u64, "action#");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

impl SessionId {
    pub fn random() -> Self {
        SessionId(uuid::Uuid::new_v4().simple().to_string())
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentOrigin {
    Extracted,
    UserAdded,
    Revised,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub id: IntentId,
    pub text: String,
    pub kept: bool,
    pub origin: IntentOrigin,
    pub created_turn: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UiKind {
    Slider,
    Radio,
    Hashtag,
}

impl UiKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UiKind::Slider => "slider",
            UiKind::Radio => "radio",
            UiKind::Hashtag => "hashtag",
        }
    }
}

impl fmt::Display for UiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Value domain of a dimension. Hashtag domains are open: the tag list holds
/// every tag seen so far (generated or user added).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DimensionDomain {
    Slider { min: i64, max: i64 },
    Radio { options: Vec<String> },
    Hashtag { tags: Vec<String> },
}

impl DimensionDomain {
    pub fn slider() -> Self {
        DimensionDomain::Slider { min: SLIDER_MIN, max: SLIDER_MAX }
    }

    pub fn ui_kind(&self) -> UiKind {
        match self {
            DimensionDomain::Slider { .. } => UiKind::Slider,
            DimensionDomain::Radio { .. } => UiKind::Radio,
            DimensionDomain::Hashtag { .. } => UiKind::Hashtag,
        }
    }

    /// Every enumerable value of the domain, rendered as strings.
    pub fn values(&self) -> Vec<String> {
        match self {
            DimensionDomain::Slider { min, max } => (*min..=*max).map(|v| v.to_string()).collect(),
            DimensionDomain::Radio { options } => options.clone(),
            DimensionDomain::Hashtag { tags } => tags.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DimensionValue {
    Slider(i64),
    Radio(String),
    Hashtag(Vec<String>),
}

impl DimensionValue {
    /// The value(s) currently in effect, as strings.
    pub fn active_values(&self) -> Vec<String> {
        match self {
            DimensionValue::Slider(v) => vec![v.to_string()],
            DimensionValue::Radio(o) => vec![o.clone()],
            DimensionValue::Hashtag(tags) => tags.clone(),
        }
    }

    pub fn ui_kind(&self) -> UiKind {
        match self {
            DimensionValue::Slider(_) => UiKind::Slider,
            DimensionValue::Radio(_) => UiKind::Radio,
            DimensionValue::Hashtag(_) => UiKind::Hashtag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimension {
    pub id: DimensionId,
    pub title: String,
    pub domain: DimensionDomain,
    pub current: DimensionValue,
    /// Explanatory text per value, keyed by the value's string form.
    pub value_descriptions: BTreeMap<String, String>,
}

impl Dimension {
    pub fn ui_kind(&self) -> UiKind {
        self.domain.ui_kind()
    }

    /// Whether `value` names something a link may point at: a domain value
    /// or a currently selected tag.
    pub fn accepts_value(&self, value: &str) -> bool {
        self.domain.values().iter().any(|v| v == value)
            || self.current.active_values().iter().any(|v| v == value)
    }

    /// Checks that `current` lies inside the domain.
    pub fn current_in_domain(&self) -> Result<(), String> {
        value_in_domain(&self.domain, &self.current)
    }

    pub fn description(&self, value: &str) -> Option<&str> {
        self.value_descriptions.get(value).map(String::as_str)
    }
}

pub(crate) fn value_in_domain(domain: &DimensionDomain, value: &DimensionValue) -> Result<(), String> {
    match (domain, value) {
        (DimensionDomain::Slider { min, max }, DimensionValue::Slider(v)) => {
            if v < min || v > max {
                Err(format!("slider value {v} outside {min}..={max}"))
            } else {
                Ok(())
            }
        }
        (DimensionDomain::Radio { options }, DimensionValue::Radio(o)) => {
            if options.contains(o) {
                Ok(())
            } else {
                Err(format!("unknown option {o:?}"))
            }
        }
        (DimensionDomain::Hashtag { .. }, DimensionValue::Hashtag(tags)) => {
            let mut seen = std::collections::BTreeSet::new();
            for t in tags {
                if !seen.insert(t) {
                    return Err(format!("duplicate tag {t:?}"));
                }
            }
            Ok(())
        }
        (d, v) => Err(format!("{} value on {} dimension", v.ui_kind(), d.ui_kind())),
    }
}

/// Normalizes a user-typed tag: trims and ensures a single leading `#`.
pub fn normalize_tag(tag: &str) -> Option<String> {
    let t = text::strip_control(tag);
    let t = t.trim_start_matches('#').trim();
    if t.is_empty() {
        None
    } else {
        Some(format!("#{t}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Add,
    Delete,
    Correct,
    Adjust,
    Rollback,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] = [
        ActionKind::Add,
        ActionKind::Delete,
        ActionKind::Correct,
        ActionKind::Adjust,
        ActionKind::Rollback,
    ];

    /// Kinds a person may pick when annotating a prompt.
    pub const ANNOTATABLE: [ActionKind; 4] =
        [ActionKind::Add, ActionKind::Delete, ActionKind::Correct, ActionKind::Adjust];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Add => "Add",
            ActionKind::Delete => "Delete",
            ActionKind::Correct => "Correct",
            ActionKind::Adjust => "Adjust",
            ActionKind::Rollback => "Rollback",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown action kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSource {
    ChatPrompt,
    TargetedPrompt,
    GoalEdit,
    IntentWidget,
    DimensionWidget,
    RollbackButton,
}

impl ActionSource {
    pub fn is_widget(self) -> bool {
        !matches!(self, ActionSource::ChatPrompt | ActionSource::TargetedPrompt)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionSource::ChatPrompt => "chat_prompt",
            ActionSource::TargetedPrompt => "targeted_prompt",
            ActionSource::GoalEdit => "goal_edit",
            ActionSource::IntentWidget => "intent_widget",
            ActionSource::DimensionWidget => "dimension_widget",
            ActionSource::RollbackButton => "rollback_button",
        }
    }
}

impl std::str::FromStr for ActionSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            ActionSource::ChatPrompt,
            ActionSource::TargetedPrompt,
            ActionSource::GoalEdit,
            ActionSource::IntentWidget,
            ActionSource::DimensionWidget,
            ActionSource::RollbackButton,
        ]
        .into_iter()
        .find(|k| k.as_str() == s.trim())
        .ok_or_else(|| format!("unknown action source {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub action_id: ActionId,
    pub kind: ActionKind,
    pub source: ActionSource,
    pub auto_classified: bool,
    pub annotation_pending: bool,
    pub timestamp: DateTime<Utc>,
    pub payload: String,
}

/// Interactions that are logged but sit outside the action taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TelemetryKind {
    KeepToggle,
    PageNavigation,
    Hover,
    DiffToggle,
    HeaderToggle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub kind: TelemetryKind,
    pub timestamp: DateTime<Utc>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatRole {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targeted_intent: Option<IntentId>,
    #[serde(default)]
    pub status_events: Vec<String>,
}

/// Copy of the intent panel stored with every page.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelSnapshot {
    pub goal: Goal,
    pub intents: Vec<Intent>,
    pub dimensions: Vec<Dimension>,
}

impl PanelSnapshot {
    pub fn intent(&self, id: IntentId) -> Option<&Intent> {
        self.intents.iter().find(|i| i.id == id)
    }

    pub fn dimension(&self, id: DimensionId) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.id == id)
    }
}

/// Next-id counters. Ids are never reused within a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdCounters {
    pub next_intent: u32,
    pub next_dimension: u32,
    pub next_action: u64,
}

impl Default for IdCounters {
    fn default() -> Self {
        IdCounters { next_intent: 1, next_dimension: 1, next_action: 1 }
    }
}

impl IdCounters {
    pub fn intent(&mut self) -> IntentId {
        let id = IntentId(self.next_intent);
        self.next_intent += 1;
        id
    }

    pub fn dimension(&mut self) -> DimensionId {
        let id = DimensionId(self.next_dimension);
        self.next_dimension += 1;
        id
    }

    pub fn action(&mut self) -> ActionId {
        let id = ActionId(self.next_action);
        self.next_action += 1;
        id
    }
}
