//! HTTP and WebSocket front end: one isolated simulation per session.
//!
//! Routes:
//! - `POST /api/sessions` creates a session with the empty plane scene
//! - `GET /api/sessions/{id}` reports run status
//! - `GET|PUT /api/sessions/{id}/scenario` reads or replaces the scene
//! - `POST /api/sessions/{id}/edit` applies one [`EditOp`]
//! - `POST /api/sessions/{id}/control` runs `start`, `pause`, `step` or `set_speed`
//! - `GET /api/sessions/{id}/diagram` returns the order-1 diagram for display
//! - `GET /ws/sessions/{id}` streams one message per tick (`?cell=true` adds the order-k cell)

mod edit;
mod error;
mod message;
mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, PoisonError};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use insq_core::{parse_scenario, save_scenario};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;
use tower_http::services::ServeDir;

pub use edit::{apply_edit, EditError, EditOp, TrajectoryInput};
pub use error::ApiError;
pub use message::{Broadcast, StreamMessage};
pub use session::{RunStatus, Session, SessionStatus};

/// Close code sent to streams opened for an unknown session.
pub const CLOSE_UNKNOWN_SESSION: u16 = 4404;
pub const DEFAULT_TICK_INTERVAL: Duration = Duration::from_millis(50);
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(30 * 60);

pub trait Clock: Send + Sync {
    fn now(&self) -> Instant;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }
}

/// Clock that only moves when told to; for expiry tests.
pub struct ManualClock {
    base: Instant,
    offset: Mutex<Duration>,
}

impl ManualClock {
    pub fn new() -> Self {
        Self {
            base: Instant::now(),
            offset: Mutex::new(Duration::ZERO),
        }
    }

    pub fn advance(&self, by: Duration) {
        *self.offset.lock().unwrap_or_else(PoisonError::into_inner) += by;
    }
}

impl Default for ManualClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Instant {
        self.base + *self.offset.lock().unwrap_or_else(PoisonError::into_inner)
    }
}

pub struct AppState {
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    ttl: Duration,
    clock: Arc<dyn Clock>,
}

impl AppState {
    pub fn new(ttl: Duration) -> Arc<Self> {
        Self::with_clock(ttl, Arc::new(SystemClock))
    }

    pub fn with_clock(ttl: Duration, clock: Arc<dyn Clock>) -> Arc<Self> {
        Arc::new(Self {
            sessions: Mutex::new(HashMap::new()),
            ttl,
            clock,
        })
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, HashMap<String, Arc<Session>>> {
        self.sessions.lock().unwrap_or_else(PoisonError::into_inner)
    }

    pub fn create_session(&self) -> Arc<Session> {
        let mut sessions = self.sessions();
        let id = loop {
            let id = format!("{:032x}", rand::random::<u128>());
            if !sessions.contains_key(&id) {
                break id;
            }
        };
        let s = Arc::new(Session::new(id.clone(), self.clock.now()));
        sessions.insert(id, s.clone());
        s
    }

    /// Looks up a session and marks it active.
    pub fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        let s = self
            .sessions()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session"))?;
        s.touch(self.clock.now());
        Ok(s)
    }

    pub fn session_count(&self) -> usize {
        self.sessions().len()
    }

    /// Drops sessions idle for at least the TTL. Running sessions are never
    /// idle. Returns the ids removed.
    pub fn purge_expired(&self) -> Vec<String> {
        let now = self.clock.now();
        let mut sessions = self.sessions();
        let expired: Vec<String> = sessions
            .iter()
            .filter(|(_, s)| {
                !s.is_running() && now.saturating_duration_since(s.last_active()) >= self.ttl
            })
            .map(|(id, _)| id.clone())
            .collect();
        for id in &expired {
            if let Some(s) = sessions.remove(id) {
                s.stop();
            }
        }
        expired
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_status))
        .route(
            "/api/sessions/{id}/scenario",
            get(get_scenario).put(put_scenario),
        )
        .route("/api/sessions/{id}/edit", post(edit))
        .route("/api/sessions/{id}/control", post(control))
        .route("/api/sessions/{id}/diagram", get(diagram))
        .route("/ws/sessions/{id}", get(stream))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

async fn create_session(State(state): State<Arc<AppState>>) -> Json<Value> {
    let s = state.create_session();
    tracing::info!(session = s.id(), "created");
    Json(json!({ "id": s.id() }))
}

async fn get_status(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionStatus>, ApiError> {
    Ok(Json(state.session(&id)?.status()))
}

async fn get_scenario(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    Ok((
        [(header::CONTENT_TYPE, "application/json")],
        save_scenario(&s.scenario()),
    )
        .into_response())
}

async fn put_scenario(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let scenario = parse_scenario(&body)?;
    s.put_scenario(scenario.clone());
    Ok((
        [(header::CONTENT_TYPE, "application/json")],
        save_scenario(&scenario),
    )
        .into_response())
}

async fn edit(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let s = state.session(&id)?;
    let op: EditOp = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("bad edit: {e}")))?;
    Ok(Json(s.edit(&op)?.to_json()))
}

#[derive(Debug, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
enum Control {
    Start { interval_ms: Option<u64> },
    Pause,
    Step,
    SetSpeed { speed: f64 },
}

async fn control(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let s = state.session(&id)?;
    let cmd: Control = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("bad command: {e}")))?;
    let out = match cmd {
        Control::Start { interval_ms } => {
            s.start(interval_ms.map_or(DEFAULT_TICK_INTERVAL, Duration::from_millis))?
        }
        Control::Pause => s.pause(),
        Control::Step => s.step()?,
        Control::SetSpeed { speed } => s.set_speed(speed)?,
    };
    Ok(Json(out))
}

async fn diagram(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    Ok(Json(state.session(&id)?.diagram()?))
}

#[derive(Debug, Default, Deserialize)]
struct StreamParams {
    #[serde(default)]
    cell: bool,
}

async fn stream(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(params): Query<StreamParams>,
    ws: WebSocketUpgrade,
) -> Response {
    let Ok(session) = state.session(&id) else {
        return ws.on_upgrade(|mut socket| async move {
            let frame = CloseFrame {
                code: CLOSE_UNKNOWN_SESSION,
                reason: "unknown session".into(),
            };
            let _ = socket.send(Message::Close(Some(frame))).await;
        });
    };
    // subscribe before the handshake completes so no tick is missed
    let rx = session.subscribe();
    let guard = params.cell.then(|| session.want_cells());
    ws.on_upgrade(move |socket| forward(socket, rx, guard))
}

async fn forward(
    mut socket: WebSocket,
    mut rx: tokio::sync::broadcast::Receiver<Arc<Broadcast>>,
    cell: Option<session::CellGuard>,
) {
    loop {
        tokio::select! {
            msg = rx.recv() => {
                let text = match msg {
                    Ok(b) => b.to_text(cell.is_some()),
                    Err(RecvError::Lagged(n)) => json!({ "error": "lagged", "skipped": n }).to_string(),
                    Err(RecvError::Closed) => break,
                };
                if socket.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub port: u16,
    pub static_dir: Option<PathBuf>,
    pub session_ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            port: 8080,
            static_dir: None,
            session_ttl: DEFAULT_SESSION_TTL,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("cannot bind port {port}: {source}")]
    Bind { port: u16, source: std::io::Error },
    #[error("static directory {0} does not exist")]
    StaticDir(PathBuf),
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Binds the port; fails fast when it is taken.
pub async fn bind(config: &ServiceConfig) -> Result<tokio::net::TcpListener, ServiceError> {
    if let Some(dir) = &config.static_dir {
        if !dir.is_dir() {
            return Err(ServiceError::StaticDir(dir.clone()));
        }
    }
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind {
            port: config.port,
            source,
        })
}

/// Serves until the process is stopped, purging idle sessions periodically.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    config: ServiceConfig,
) -> Result<(), ServiceError> {
    let state = AppState::new(config.session_ttl);
    let sweeper = state.clone();
    let period =
        (config.session_ttl / 4).clamp(Duration::from_millis(100), Duration::from_secs(60));
    tokio::spawn(async move {
        loop {
            tokio::time::sleep(period).await;
            for id in sweeper.purge_expired() {
                tracing::info!(session = %id, "expired");
            }
        }
    });
    let app = router(state, config.static_dir.clone());
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app).await?;
    Ok(())
}

pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let listener = bind(&config).await?;
    serve_on(listener, config).await
}

impl From<StatusCode> for ApiError {
    fn from(status: StatusCode) -> Self {
        ApiError::new(status, status.canonical_reason().unwrap_or("error"))
    }
}
