//! HTTP and WebSocket service around editing sessions.
//!
//! | method | path | body / query | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | [`api::CreateSessionRequest`] | [`api::SessionState`] |
//! | POST | `/sessions/{id}/edits` | [`api::EditRequest`] | [`api::EditResponse`] |
//! | POST | `/sessions/{id}/undo` | — | [`api::UndoResponse`] |
//! | GET | `/sessions/{id}/frame` | `cam=<camera json>&format=png\|raw` | image bytes, `x-frame-hash` header |
//! | GET | `/sessions/{id}/state` | — | [`api::SessionState`] |
//! | POST | `/sessions/{id}/save` | [`api::SaveRequest`] (optional) | [`api::SaveResponse`] |
//! | POST | `/sessions/load` | [`api::LoadRequest`] | [`api::SessionState`] |
//! | GET (ws) | `/sessions/{id}/stream` | `encoding=png\|raw` | [`api::ServerMessage`] stream |
//!
//! Errors come back as `{"error": {"code": ..., "message": ...}}` with one of
//! the [`ErrorCode`]s. Edits on one session are serialized: by default a
//! second concurrent edit is answered with `busy`; [`BusyPolicy::Queue`]
//! makes it wait instead. At most `capacity` sessions stay in memory; with a
//! session directory the least recently used idle one is written out and
//! comes back transparently on its next request.

pub mod api;
mod error;
mod registry;
mod routes;

use std::sync::Arc;

pub use error::{ErrorBody, ErrorCode, Result, ServiceError};
pub use registry::{BusyPolicy, Service, ServiceConfig, SessionHandle, StreamEvent, WriteTicket};
pub use routes::router;

/// Binds `config.listen` and serves until Ctrl-C.
pub async fn serve(service: Service) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(service.config().listen).await?;
    serve_on(listener, Arc::new(service), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

/// Serves on an existing listener until `shutdown` resolves.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    service: Arc<Service>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}
