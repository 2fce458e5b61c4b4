//! HTTP session API for annotating a live run. JSON over `/v1`, polled by the
//! client; each session is serialized behind its own lock.

pub mod error;
pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, Query, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::Value;

use sdrift_core::ebc::Event;
use sdrift_core::eval::ExperimentConfig;

pub use error::ApiError;
pub use session::{AnnotationRequest, CreateRequest, ExplanationPayload, FeatureRow, LiveSession, Mode, SessionState};

type Shared = Arc<Mutex<LiveSession>>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    default_config: Option<ExperimentConfig>,
    sessions: RwLock<HashMap<String, Shared>>,
    next_id: AtomicU64,
}

impl AppState {
    /// `default_config` is used by create requests that carry no config.
    pub fn new(default_config: Option<ExperimentConfig>) -> Self {
        Self {
            inner: Arc::new(Inner {
                default_config,
                sessions: RwLock::default(),
                next_id: AtomicU64::new(1),
            }),
        }
    }

    fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/step", post(step_session))
        .route("/v1/sessions/{id}/events", get(get_events))
        .route("/v1/sessions/{id}/annotation", post(submit_annotation))
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(addr: SocketAddr, default_config: Option<ExperimentConfig>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(default_config))).await
}

/// Runs `f` on the session off the async executor; the lock serializes
/// concurrent calls to the same session.
async fn with_session<T, F>(state: &AppState, id: &str, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut LiveSession) -> Result<T, ApiError> + Send + 'static,
{
    let shared = state.get(id)?;
    tokio::task::spawn_blocking(move || {
        let mut s = shared.lock().map_err(|_| ApiError::Internal("session lock poisoned".into()))?;
        f(&mut s)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn create_session(State(state): State<AppState>, body: Option<Json<Value>>) -> Result<Json<SessionState>, ApiError> {
    let body = body.map(|Json(v)| v).unwrap_or(Value::Object(Default::default()));
    let req: CreateRequest = serde_json::from_value(body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let cfg = match req.config.clone() {
        Some(v) => session::parse_config(v)?,
        None => state
            .inner
            .default_config
            .clone()
            .ok_or_else(|| ApiError::BadRequest("request has no config and the server has no default".into()))?,
    };
    let id = format!("s{}", state.inner.next_id.fetch_add(1, Ordering::Relaxed));
    let live = {
        let id = id.clone();
        tokio::task::spawn_blocking(move || LiveSession::create(id, &cfg, &req))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))??
    };
    let snapshot = live.state();
    state
        .inner
        .sessions
        .write()
        .expect("session map lock")
        .insert(id, Arc::new(Mutex::new(live)));
    Ok(Json(snapshot))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    with_session(&state, &id, |s| Ok(s.state())).await.map(Json)
}

#[derive(Deserialize)]
struct StepParams {
    n: Option<usize>,
}

async fn step_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(p): Query<StepParams>,
) -> Result<Json<SessionState>, ApiError> {
    let n = p.n.unwrap_or(1);
    with_session(&state, &id, move |s| {
        s.step(n)?;
        Ok(s.state())
    })
    .await
    .map(Json)
}

#[derive(Deserialize)]
struct EventParams {
    since: Option<usize>,
}

async fn get_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(p): Query<EventParams>,
) -> Result<Json<Vec<Event>>, ApiError> {
    let since = p.since.unwrap_or(0);
    with_session(&state, &id, move |s| Ok(s.events(since))).await.map(Json)
}

async fn submit_annotation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<AnnotationRequest>,
) -> Result<Json<SessionState>, ApiError> {
    with_session(&state, &id, move |s| {
        s.annotate(&req.spurious)?;
        Ok(s.state())
    })
    .await
    .map(Json)
}
