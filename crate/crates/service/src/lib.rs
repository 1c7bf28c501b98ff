//! HTTP API for human annotators: task assignment in corpus order,
//! advisory engine suggestions, server-scored submissions and live
//! pairwise agreement.

pub mod api;
pub mod config;

use std::net::SocketAddr;
use std::path::Path;

use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub use api::{AppState, Clock};
pub use config::{ConfigError, ServiceConfig};

/// API routes under `/api`, plus the workbench bundle from `static_dir` when given.
pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/tasks/next", get(api::next_task))
        .route("/api/annotations", post(api::submit))
        .route("/api/assist", get(api::assist))
        .route("/api/agreement", get(api::agreement))
        .route("/api/codebook", get(api::codebook))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive())
}

pub async fn serve(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}
