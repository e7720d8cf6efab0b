//! HTTP/JSON front end: session store, routes and the server loop.

use std::collections::{HashMap, HashSet};
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qbench_core::protocol::ProtocolError;
use qbench_core::simulator::{NoiseModel, Shots};
use qbench_core::topology::{DeviceCatalog, TopologyError};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;

use crate::puzzle::{Puzzle, PuzzleEdge};
use crate::session::{GameError, GameSession, GameSettings, GameSummary, SavedGames, Transcript};

#[derive(Debug, Clone)]
pub struct GameConfig {
    /// Device used when a create request names none.
    pub default_device: Option<String>,
    pub shots: Shots,
    pub noise: NoiseModel,
    pub idle_timeout: Duration,
    /// Reported to clients, which declare the game over after two
    /// consecutive rounds scoring below it.
    pub game_over_threshold: f64,
    /// Sessions are restored from and written back to this file.
    pub snapshot: Option<PathBuf>,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            default_device: None,
            shots: Shots::Exact,
            noise: NoiseModel::noiseless(),
            idle_timeout: Duration::from_secs(30 * 60),
            game_over_threshold: 0.5,
            snapshot: None,
        }
    }
}

/// Error response body: `{"error": "...", "label": "..."}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub label: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            label: None,
        }
    }
}

impl From<GameError> for ApiError {
    fn from(err: GameError) -> Self {
        let status = match &err {
            GameError::Device(TopologyError::UnknownDevice(_)) => StatusCode::NOT_FOUND,
            GameError::Device(_) | GameError::Pairing { .. } | GameError::Invalid(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            GameError::Protocol(ProtocolError::Sim(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            GameError::Finished => StatusCode::CONFLICT,
            GameError::SavedData(_) | GameError::Protocol(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let label = match &err {
            GameError::Pairing { label, .. } => Some(label.clone()),
            _ => None,
        };
        ApiError {
            status,
            message: err.to_string(),
            label,
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        ApiError::new(rejection.status(), rejection.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = match self.label {
            Some(label) => json!({ "error": self.message, "label": label }),
            None => json!({ "error": self.message }),
        };
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateGame {
    pub device: Option<String>,
    pub shots: Option<Shots>,
    pub noise: Option<NoiseModel>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub puzzle: Puzzle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pairing {
    pub pairs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Feedback {
    /// Absent once saved data runs out.
    pub puzzle: Option<Puzzle>,
    /// Fraction of the previous round's true pairs that were submitted.
    pub feedback: f64,
    pub finished: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameView {
    pub id: String,
    #[serde(flatten)]
    pub summary: GameSummary,
    pub game_over_threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceInfo {
    pub name: String,
    pub num_qubits: usize,
    pub edges: Vec<PuzzleEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Snapshot {
    pub sessions: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub id: String,
    pub transcript: Transcript,
}

pub type SessionHandle = Arc<tokio::sync::Mutex<GameSession>>;

struct Slot {
    session: SessionHandle,
    last_active: Instant,
}

struct Inner {
    catalog: DeviceCatalog,
    config: GameConfig,
    saved: Option<SavedGames>,
    sessions: Mutex<HashMap<String, Slot>>,
    expired: Mutex<HashSet<String>>,
}

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// With `saved`, games replay recorded rounds instead of simulating.
    pub fn new(catalog: DeviceCatalog, config: GameConfig, saved: Option<SavedGames>) -> Self {
        AppState {
            inner: Arc::new(Inner {
                catalog,
                config,
                saved,
                sessions: Mutex::new(HashMap::new()),
                expired: Mutex::new(HashSet::new()),
            }),
        }
    }

    pub fn config(&self) -> &GameConfig {
        &self.inner.config
    }

    fn insert(&self, session: GameSession) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.insert_with_id(id.clone(), session);
        id
    }

    fn insert_with_id(&self, id: String, session: GameSession) {
        let slot = Slot {
            session: Arc::new(tokio::sync::Mutex::new(session)),
            last_active: Instant::now(),
        };
        self.inner.sessions.lock().unwrap().insert(id, slot);
    }

    /// Starts a game and returns its id and first puzzle.
    pub fn create(&self, req: CreateGame) -> Result<Created, ApiError> {
        let config = &self.inner.config;
        let device = req.device.or_else(|| config.default_device.clone());
        let seed = req.seed.unwrap_or_else(rand::random);
        let session = match &self.inner.saved {
            Some(saved) => {
                if let Some(device) = device.filter(|d| d != saved.device()) {
                    return Err(ApiError::new(
                        StatusCode::NOT_FOUND,
                        format!("no saved data for device `{device}`; this server replays `{}`", saved.device()),
                    ));
                }
                GameSession::saved(saved, (seed % saved.len() as u64) as usize)
            }
            None => {
                let device = device.ok_or_else(|| {
                    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "missing field `device`")
                })?;
                let noise = req.noise.unwrap_or(config.noise);
                noise
                    .validate()
                    .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
                GameSession::live(
                    &self.inner.catalog,
                    GameSettings {
                        device,
                        shots: req.shots.unwrap_or(config.shots),
                        noise,
                        seed,
                    },
                )?
            }
        };
        let puzzle = session.puzzles()[0].clone();
        let id = self.insert(session);
        Ok(Created { id, puzzle })
    }

    /// Looks a session up and marks it active. Idle sessions are expired on
    /// the spot.
    pub fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        let mut sessions = self.inner.sessions.lock().unwrap();
        let Some(slot) = sessions.get_mut(id) else {
            drop(sessions);
            return Err(self.missing(id));
        };
        if slot.last_active.elapsed() > self.inner.config.idle_timeout {
            sessions.remove(id);
            self.inner.expired.lock().unwrap().insert(id.to_string());
            return Err(self.missing(id));
        }
        slot.last_active = Instant::now();
        Ok(slot.session.clone())
    }

    fn missing(&self, id: &str) -> ApiError {
        if self.inner.expired.lock().unwrap().contains(id) {
            ApiError::new(StatusCode::GONE, format!("game {id} expired after inactivity"))
        } else {
            ApiError::new(StatusCode::NOT_FOUND, format!("no game with id {id}"))
        }
    }

    /// Removes sessions idle for longer than the timeout; returns how many.
    pub fn expire_idle(&self) -> usize {
        let timeout = self.inner.config.idle_timeout;
        let mut sessions = self.inner.sessions.lock().unwrap();
        let stale: Vec<String> = sessions
            .iter()
            .filter(|(_, slot)| slot.last_active.elapsed() > timeout)
            .map(|(id, _)| id.clone())
            .collect();
        let mut expired = self.inner.expired.lock().unwrap();
        for id in &stale {
            sessions.remove(id);
            expired.insert(id.clone());
        }
        stale.len()
    }

    pub fn len(&self) -> usize {
        self.inner.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub async fn snapshot(&self) -> Snapshot {
        let handles: Vec<(String, SessionHandle)> = {
            let sessions = self.inner.sessions.lock().unwrap();
            sessions
                .iter()
                .map(|(id, slot)| (id.clone(), slot.session.clone()))
                .collect()
        };
        let mut entries = Vec::with_capacity(handles.len());
        for (id, handle) in handles {
            let transcript = handle.lock().await.transcript().clone();
            entries.push(SnapshotEntry { id, transcript });
        }
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        Snapshot { sessions: entries }
    }

    /// Replays every transcript in `snapshot`; returns how many sessions
    /// were restored.
    pub fn restore(&self, snapshot: &Snapshot) -> Result<usize, GameError> {
        for entry in &snapshot.sessions {
            let session = GameSession::replay(&entry.transcript, &self.inner.catalog, self.inner.saved.as_ref())?;
            self.insert_with_id(entry.id.clone(), session);
        }
        Ok(snapshot.sessions.len())
    }

    pub async fn save_snapshot(&self, path: &Path) -> std::io::Result<()> {
        let snapshot = self.snapshot().await;
        let text = serde_json::to_string_pretty(&snapshot).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")
    }

    /// Restores sessions from `path` if it exists.
    pub fn load_snapshot(&self, path: &Path) -> Result<usize, GameError> {
        let text = match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
            Err(e) => return Err(GameError::Invalid(format!("reading {}: {e}", path.display()))),
        };
        let snapshot: Snapshot = serde_json::from_str(&text)
            .map_err(|e| GameError::Invalid(format!("parsing {}: {e}", path.display())))?;
        self.restore(&snapshot)
    }
}

async fn create_game(
    State(state): State<AppState>,
    body: Result<Json<CreateGame>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let Json(req) = body?;
    let created = tokio::task::spawn_blocking(move || state.create(req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn submit_pairing(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<Pairing>, JsonRejection>,
) -> Result<Json<Feedback>, ApiError> {
    let handle = state.session(&id)?;
    let Json(pairing) = body?;
    let mut guard = handle.try_lock_owned().map_err(|_| {
        ApiError::new(
            StatusCode::CONFLICT,
            format!("another pairing for game {id} is still being processed"),
        )
    })?;
    let turn = tokio::task::spawn_blocking(move || guard.submit(&pairing.pairs))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(Feedback {
        finished: turn.puzzle.is_none(),
        puzzle: turn.puzzle,
        feedback: turn.feedback,
    }))
}

async fn get_game(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<GameView>, ApiError> {
    let handle = state.session(&id)?;
    let summary = handle.lock().await.summary();
    Ok(Json(GameView {
        id,
        summary,
        game_over_threshold: state.inner.config.game_over_threshold,
    }))
}

async fn list_devices(State(state): State<AppState>) -> Json<Vec<DeviceInfo>> {
    let catalog = &state.inner.catalog;
    let names = match &state.inner.saved {
        Some(saved) => vec![saved.device().to_string()],
        None => catalog.names(),
    };
    let devices = names
        .iter()
        .filter_map(|name| catalog.get(name).ok())
        .map(|g| DeviceInfo {
            name: g.name().to_string(),
            num_qubits: g.num_qubits(),
            edges: g
                .edges()
                .iter()
                .map(|e| PuzzleEdge {
                    label: e.label.clone(),
                    endpoints: [e.a, e.b],
                })
                .collect(),
            layout: g.layout().map(<[_]>::to_vec),
            provenance: g.provenance().map(str::to_string),
        })
        .collect();
    Json(devices)
}

async fn preflight() -> StatusCode {
    StatusCode::NO_CONTENT
}

async fn allow_any_origin(mut response: Response) -> Response {
    let headers = response.headers_mut();
    headers.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    headers.insert(
        header::ACCESS_CONTROL_ALLOW_METHODS,
        HeaderValue::from_static("GET, POST, OPTIONS"),
    );
    headers.insert(
        header::ACCESS_CONTROL_ALLOW_HEADERS,
        HeaderValue::from_static("content-type"),
    );
    response
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/games", post(create_game).options(preflight))
        .route("/games/{id}", get(get_game).options(preflight))
        .route("/games/{id}/pairing", post(submit_pairing).options(preflight))
        .route("/devices", get(list_devices).options(preflight))
        .fallback(|method: Method| async move {
            ApiError::new(StatusCode::NOT_FOUND, format!("no route for this {method} request"))
        })
        .layer(axum::middleware::map_response(allow_any_origin))
        .with_state(state)
}

/// Serves until `shutdown` resolves, expiring idle sessions in the
/// background, then writes the snapshot file if one is configured.
pub async fn serve(
    state: AppState,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let period = (state.inner.config.idle_timeout / 2).clamp(Duration::from_secs(1), Duration::from_secs(60));
    let sweeper = {
        let state = state.clone();
        tokio::spawn(async move {
            let mut ticks = tokio::time::interval(period);
            loop {
                ticks.tick().await;
                state.expire_idle();
            }
        })
    };
    let result = axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await;
    sweeper.abort();
    if let Some(path) = &state.inner.config.snapshot {
        state.save_snapshot(path).await?;
    }
    result
}
