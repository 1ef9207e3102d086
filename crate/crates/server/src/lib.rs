//! HTTP API over the coordination core, with role checks on every route
//! and a resumable server-sent event stream.

pub mod config;
mod error;
mod routes;
mod state;
mod stream;

use thiserror::Error;

pub use config::{AuthConfig, ServerConfig, TokenEntry};
pub use error::ApiError;
pub use state::{seed_participants, AppState, Session};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] corec_core::error::StoreError),
    #[error(transparent)]
    Coord(#[from] corec_core::CoordError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The service router. Starts the background re-planner on first use, so
/// it must be called inside a Tokio runtime.
pub fn app(state: AppState) -> axum::Router {
    state.start_replanner();
    routes::router(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, app(state)).await
}
