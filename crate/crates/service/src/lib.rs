//! HTTP service over IntentFlow sessions.
//!
//! Sessions live in memory and are persisted as append-only event logs under
//! a data directory (see [`store`]). Every mutation is serialized per
//! session; chat turns run in the background and report progress on the
//! session's server-sent event stream.

pub mod api;
pub mod config;
pub mod hub;
pub mod state;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

use intentflow_core::clock::SystemClock;
use intentflow_core::pipeline::PipelineOptions;
use intentflow_core::Gateway;
use thiserror::Error;

pub use api::router;
pub use config::{ConfigError, ProviderMode, ServiceConfig};
pub use hub::{EventEnvelope, EventHub, EventKind};
pub use state::{AppState, ChatRequest, EditOutcome, Engine, ServiceError, SessionListing, TurnAccepted};
pub use store::{DataDir, EventLog, PersistedEvent, StoreError};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot open data directory: {0}")]
    Data(ServiceError),
    #[error("cannot bind port {port}: {source}")]
    Bind { port: u16, source: std::io::Error },
    #[error("server stopped: {0}")]
    Io(#[from] std::io::Error),
}

/// Builds the shared state for `config`, recovering stored sessions.
pub fn app_state(config: &ServiceConfig) -> Result<Arc<AppState>, ServeError> {
    let provider = config.build_provider()?;
    let engine = Engine {
        gateway: Arc::new(Gateway::new(provider, config.provider.clone())),
        options: PipelineOptions { baseline: config.baseline, ..Default::default() },
        clock: Arc::new(SystemClock),
        snapshot_every: config.snapshot_every,
    };
    AppState::open(&config.data_dir, engine).map(Arc::new).map_err(ServeError::Data)
}

/// Runs the service until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let state = app_state(&config)?;
    let addr = SocketAddr::from(([127, 0, 0, 1], config.port));
    let listener =
        tokio::net::TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { port: config.port, source })?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
