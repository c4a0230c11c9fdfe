//! HTTP front end for annotator review.
//!
//! Routes:
//! - `GET /api/tasks/next?annotator=ID`: `{"task": Task | null}`
//! - `POST /api/judgments`: a [`Submission`] body, answered with a [`Receipt`]
//! - `GET /api/progress`: [`kbner_core::adjudication::Progress`]
//! - `GET /api/export?quorum=N`: ground-truth file (default quorum 3)
//!
//! Anything else is served from the optional UI directory.

use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kbner_core::adjudication::{Adjudication, Submission};
use kbner_core::Error;
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

pub const DEFAULT_QUORUM: usize = 3;

pub type SharedState = Arc<Mutex<Adjudication>>;

pub struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownTask(_) => StatusCode::NOT_FOUND,
            Error::UnknownAnnotator(_) => StatusCode::FORBIDDEN,
            Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn lock(state: &SharedState) -> Result<MutexGuard<'_, Adjudication>, ApiError> {
    state.lock().map_err(|_| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "state lock poisoned".into()))
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

async fn next_task(State(state): State<SharedState>, Query(q): Query<NextQuery>) -> Result<Response, ApiError> {
    let s = lock(&state)?;
    let task = s.next_task(&q.annotator)?;
    Ok(Json(json!({ "task": task })).into_response())
}

async fn submit(State(state): State<SharedState>, body: String) -> Result<Response, ApiError> {
    let sub: Submission =
        serde_json::from_str(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("rejected: {e}")))?;
    let receipt = lock(&state)?.submit(sub)?;
    Ok(Json(receipt).into_response())
}

async fn progress(State(state): State<SharedState>) -> Result<Response, ApiError> {
    Ok(Json(lock(&state)?.progress()).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    quorum: Option<usize>,
}

async fn export(State(state): State<SharedState>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    let gt = lock(&state)?.export(q.quorum.unwrap_or(DEFAULT_QUORUM))?;
    Ok(([(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")], gt.to_tsv()).into_response())
}

async fn no_ui() -> impl IntoResponse {
    (StatusCode::NOT_FOUND, "no UI directory configured; the API lives under /api/\n")
}

pub fn router(state: SharedState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/judgments", post(submit))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api.fallback(no_ui),
    }
}

/// Serve until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
