//! Domain types and the versioned session state machine. Nothing in here
//! talks to a model provider.

mod document;
mod page;
pub mod reconcile;
mod session;
mod types;

pub use document::{Link, LinkSource, OutputDocument, Section, SectionRange, Span, SECTION_SEPARATOR};
pub(crate) use page::hex_digest;
pub use page::{LinkRepairs, OutputPage, PageDraft, PageSummary, Provenance};
pub use session::{
    DimensionEdit, GoalEdit, IntentEdit, PanelRevision, SessionEvent, SessionState, TurnRecord,
    SESSION_SCHEMA,
};
pub use types::*;

use thiserror::Error;

use crate::analytics::AnalyticsError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid link: {0}")]
    LinkValidation(String),
    #[error("session has no goal yet; complete a first turn")]
    NoGoal,
    #[error("action {0} was already annotated")]
    AlreadyAnnotated(ActionId),
}

impl From<AnalyticsError> for ModelError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::NotFound(id) => ModelError::NotFound(id.to_string()),
            AnalyticsError::AlreadyAnnotated(id) => ModelError::AlreadyAnnotated(id),
            AnalyticsError::NotAnnotatable(k) => {
                ModelError::Validation(format!("{k} is not an annotation choice"))
            }
            other => ModelError::Validation(other.to_string()),
        }
    }
}
