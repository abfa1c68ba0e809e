//! Session service: drives one plant per participant, answers what and why
//! questions, and serves quiz sheets and reports over HTTP and WebSocket.
//!
//! Every state-changing command goes through a per-session task and is
//! journaled before it is acknowledged, so sessions survive a restart.

pub mod actor;
pub mod app;
pub mod config;
pub mod http;
pub mod journal;
pub mod protocol;
pub mod session;

use std::path::PathBuf;
use std::sync::Arc;

use infopower_core::metrics::RuleCatalog;
use infopower_core::tree::DecisionTreePolicy;
use thiserror::Error;

pub use app::{AppState, Settings};
pub use config::ServiceConfig;
pub use protocol::{ClientMessage, ErrorCode, ProtocolError, ServerMessage};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("session {0} already exists")]
    DuplicateSession(String),
    #[error(transparent)]
    Journal(#[from] journal::JournalError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl AppState {
    pub fn from_config(
        config: &ServiceConfig,
        tree: Arc<DecisionTreePolicy>,
        catalog: Arc<RuleCatalog>,
    ) -> Self {
        let settings = Settings {
            mode: config.mode,
            plant: config.plant.clone(),
            step: config.step_duration(),
            journal_dir: config.journal_dir.clone(),
        };
        AppState::new(tree, catalog, settings)
    }
}

/// Bind, recover journaled sessions and serve until the process stops.
pub async fn serve(
    config: &ServiceConfig,
    tree: Arc<DecisionTreePolicy>,
    catalog: Arc<RuleCatalog>,
) -> Result<(), ServiceError> {
    let state = AppState::from_config(config, tree, catalog);
    let recovered = state.recover()?;
    if !recovered.is_empty() {
        tracing::info!(count = recovered.len(), "recovered sessions");
    }
    let addr = format!("{}:{}", config.bind, config.port);
    let io = |source| ServiceError::Io { path: PathBuf::from(&addr), source };
    let listener = tokio::net::TcpListener::bind(&addr).await.map_err(io)?;
    tracing::info!(addr = %listener.local_addr().map_err(io)?, "listening");
    axum::serve(listener, http::router(state)).await.map_err(io)
}
