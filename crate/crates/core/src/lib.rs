//! Intent extraction, linked generation, and versioned writing sessions.
//!
//! The crate is layered: [`model`] holds the domain types and the session
//! state machine, [`gateway`] talks to completion providers, [`pipeline`]
//! orchestrates the six modules over a session, and [`harness`] runs the
//! structural evaluation over a prompt corpus.

pub mod analytics;
pub mod clock;
pub mod diff;
pub mod gateway;
pub mod harness;
pub mod links;
pub mod model;
pub mod pipeline;
pub mod text;

pub use analytics::{summarize, ActionSummary, SessionLog};
pub use diff::{compute_diff, DiffSegment, DiffView, SegmentKind};
pub use gateway::{Gateway, GatewayError, ModuleKind, Provider, ProviderConfig};
pub use links::{locate_quotes, validate_links};
pub use model::*;
pub use pipeline::{PanelEdit, Pipeline, PipelineError, TurnResult};

