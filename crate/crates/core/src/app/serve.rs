//! HTTP retrieval service.
//!
//! * `POST /v1/retrieve` with `{script_id, position, text?, k?, mode?, probes?, pref?, explicit_clip_id?, script?}`
//!   returns a style prompt bundle. An inline `script` is registered under its id.
//! * `GET /health` returns `{status, record_count}`.
//! * `POST /v1/reload` re-reads the index and records from disk and swaps them in.
//!
//! Errors are `{error, message}` with a 4xx/5xx status.

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;

use super::db::{load_database, ScriptRegistry};
use crate::domain::{StyleQuery, UserPreference};
use crate::error::Error;
use crate::retrieval::{EmbeddingMode, Probes, RetrievalConfig, Retriever, StylePromptBundle};
use crate::script::Script;

pub struct ServeState {
    pub retriever: Retriever,
    pub scripts: ScriptRegistry,
    pub defaults: RetrievalConfig,
    pub index_path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrieveBody {
    pub script_id: String,
    pub position: usize,
    /// Defaults to the script's line at `position`.
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub mode: Option<EmbeddingMode>,
    #[serde(default)]
    pub probes: Option<Probes>,
    #[serde(default)]
    pub include_user: Option<bool>,
    #[serde(default)]
    pub pref: Option<UserPreference>,
    #[serde(default)]
    pub explicit_clip_id: Option<String>,
    #[serde(default)]
    pub script: Option<Script>,
}

pub struct ApiError(StatusCode, String, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownScript(_) | Error::UnknownClipId(_) => StatusCode::NOT_FOUND,
            Error::EmptyDatabase => StatusCode::SERVICE_UNAVAILABLE,
            Error::EndpointUnavailable { .. } => StatusCode::BAD_GATEWAY,
            Error::Io { .. } | Error::CorruptFile(_) | Error::UnsupportedVersion { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.code().to_string(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1, "message": self.2 }))).into_response()
    }
}

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/retrieve", post(retrieve))
        .route("/v1/reload", post(reload))
        .with_state(state)
}

async fn health(State(s): State<Arc<ServeState>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "record_count": s.retriever.record_count() }))
}

async fn retrieve(
    State(s): State<Arc<ServeState>>,
    body: Result<Json<RetrieveBody>, JsonRejection>,
) -> Result<Json<StylePromptBundle>, ApiError> {
    let Json(body) = body.map_err(|r| ApiError(StatusCode::BAD_REQUEST, "MalformedBody".into(), r.body_text()))?;
    let query_id = uuid::Uuid::new_v4();
    let span = tracing::info_span!("query", %query_id, script_id = %body.script_id, position = body.position);
    tokio::task::spawn_blocking(move || {
        let _g = span.enter();
        run_query(&s, body)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "Internal".into(), e.to_string()))?
    .map(Json)
    .map_err(ApiError::from)
}

impl ServeState {
    pub fn handle(&self, body: RetrieveBody) -> crate::Result<StylePromptBundle> {
        run_query(self, body)
    }
}

fn run_query(s: &ServeState, body: RetrieveBody) -> crate::Result<StylePromptBundle> {
    if let Some(script) = body.script {
        if script.script_id != body.script_id {
            return Err(Error::InvalidArgument("inline script id differs from script_id".into()));
        }
        s.scripts.insert(script);
    }
    let script = s.scripts.get(&body.script_id)?;
    let text = match body.text {
        Some(t) => t,
        None => script
            .utterances
            .get(body.position)
            .map(|u| u.text.clone())
            .ok_or(Error::PositionOutOfRange {
                position: body.position,
                len: script.len(),
            })?,
    };
    let mut query = StyleQuery::new(body.script_id, body.position, text);
    query.k = body.k.unwrap_or(s.defaults.k);
    query.user_pref = body.pref;
    if let Some(id) = body.explicit_clip_id {
        query.explicit_style_clip = Some(s.retriever.database().store.clip(&id)?.clone());
    }
    let config = RetrievalConfig {
        k: query.k,
        embedding_mode: body.mode.unwrap_or(s.defaults.embedding_mode),
        probes: body.probes.unwrap_or(s.defaults.probes),
        include_user: body.include_user.or(s.defaults.include_user),
    };
    s.retriever.retrieve(&query, &config, &script)
}

async fn reload(State(s): State<Arc<ServeState>>) -> Result<Json<serde_json::Value>, ApiError> {
    let state = Arc::clone(&s);
    let count = tokio::task::spawn_blocking(move || -> crate::Result<usize> {
        let db = load_database(&state.index_path)?;
        let n = db.index.len();
        state.retriever.swap(db)?;
        Ok(n)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "Internal".into(), e.to_string()))??;
    tracing::info!(record_count = count, "index reloaded");
    Ok(Json(json!({ "status": "reloaded", "record_count": count })))
}

/// Serves until `shutdown` resolves; in-flight requests are allowed to finish.
pub async fn serve_on(
    listener: TcpListener,
    state: Arc<ServeState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
pub async fn termination_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
