//! HTTP suggestion service over an immutable index snapshot.
//!
//! Routes: `POST /suggest/rows`, `POST /suggest/columns`, `GET /health`,
//! `GET /snapshot` and `POST /admin/reload`.

pub mod request;
pub mod snapshot;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tabassist_core::eval::Task;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use request::{
    plan, suggest, Plan, RequestError, SuggestRequest, SuggestResponse, DEFAULT_TOP_K, DEFAULT_TOP_K_CAP,
};
pub use snapshot::{Snapshot, SnapshotError, SnapshotSource, SnapshotStatus, SnapshotStore};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub top_k_cap: usize,
    /// Origins allowed by CORS; none means no CORS headers.
    pub cors_allowlist: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { top_k_cap: DEFAULT_TOP_K_CAP, cors_allowlist: Vec::new() }
    }
}

#[derive(Debug)]
pub struct AppState {
    pub snapshots: SnapshotStore,
    /// Reload source; `/admin/reload` is refused without one.
    pub source: Option<SnapshotSource>,
    pub config: ServiceConfig,
}

impl AppState {
    pub fn new(source: Option<SnapshotSource>, config: ServiceConfig) -> Arc<Self> {
        Arc::new(AppState { snapshots: SnapshotStore::default(), source, config })
    }

    /// Starts a background reload from the configured source. Returns the
    /// version being loaded, or `None` if one is already in progress.
    pub fn spawn_reload(self: &Arc<Self>) -> Result<Option<u64>, ApiError> {
        let source = self.source.clone().ok_or(ApiError::NoSource)?;
        let Some(ticket) = self.snapshots.begin_reload() else { return Ok(None) };
        let version = ticket.version;
        let state = Arc::clone(self);
        tokio::task::spawn_blocking(move || {
            let result = source.load(ticket.version);
            state.snapshots.finish_reload(ticket, result);
        });
        Ok(Some(version))
    }
}

#[derive(Debug)]
pub enum ApiError {
    Malformed(String),
    Invalid(RequestError),
    Unavailable,
    ReloadInProgress,
    NoSource,
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::Malformed(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Invalid(e) => (StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            ApiError::Unavailable => (StatusCode::SERVICE_UNAVAILABLE, "no snapshot loaded yet".to_string()),
            ApiError::ReloadInProgress => (StatusCode::CONFLICT, "a reload is already in progress".to_string()),
            ApiError::NoSource => (StatusCode::CONFLICT, "service has no snapshot source to reload from".to_string()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let mut app = Router::new()
        .route("/suggest/rows", post(suggest_rows))
        .route("/suggest/columns", post(suggest_columns))
        .route("/health", get(health))
        .route("/snapshot", get(snapshot_status))
        .route("/admin/reload", post(reload));
    if !state.config.cors_allowlist.is_empty() {
        let origins: Vec<HeaderValue> =
            state.config.cors_allowlist.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([axum::http::header::CONTENT_TYPE]),
        );
    }
    app.with_state(state)
}

async fn suggest_rows(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<SuggestResponse>, ApiError> {
    handle_suggest(state, Task::Rows, body).await
}

async fn suggest_columns(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<SuggestResponse>, ApiError> {
    handle_suggest(state, Task::Columns, body).await
}

async fn handle_suggest(state: Arc<AppState>, task: Task, body: Bytes) -> Result<Json<SuggestResponse>, ApiError> {
    let req: SuggestRequest = serde_json::from_slice(&body).map_err(|e| ApiError::Malformed(e.to_string()))?;
    let plan = plan(task, &req, state.config.top_k_cap).map_err(ApiError::Invalid)?;
    let snapshot = state.snapshots.current().ok_or(ApiError::Unavailable)?;
    let started = Instant::now();
    let version = snapshot.version;
    let ranked = tokio::task::spawn_blocking(move || plan.run(&snapshot.engine))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(SuggestResponse {
        task,
        suggestions: ranked.items,
        timing_ms: started.elapsed().as_secs_f64() * 1e3,
        snapshot_version: version,
    }))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let status = state.snapshots.status();
    let label = match (&status.current, status.loading) {
        (Some(_), _) => "ok",
        (None, Some(_)) => "loading",
        (None, None) => "empty",
    };
    Json(json!({
        "status": label,
        "snapshot_version": status.current.map(|c| c.version),
        "loading_version": status.loading,
    }))
}

async fn snapshot_status(State(state): State<Arc<AppState>>) -> Json<SnapshotStatus> {
    Json(state.snapshots.status())
}

async fn reload(State(state): State<Arc<AppState>>) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    match state.spawn_reload()? {
        Some(version) => Ok((StatusCode::ACCEPTED, Json(json!({ "loading_version": version })))),
        None => Err(ApiError::ReloadInProgress),
    }
}

/// Serves until Ctrl-C. On Unix, SIGHUP triggers a reload.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    #[cfg(unix)]
    {
        let state = Arc::clone(&state);
        let mut hangup = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::hangup())?;
        tokio::spawn(async move {
            while hangup.recv().await.is_some() {
                match state.spawn_reload() {
                    Ok(Some(version)) => tracing::info!(version, "reload requested by signal"),
                    Ok(None) => tracing::warn!("reload already in progress"),
                    Err(e) => tracing::warn!(?e, "reload unavailable"),
                }
            }
        });
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
