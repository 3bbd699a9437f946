//! Instruction server: simulator sessions over HTTP (`api-v1`) and a
//! websocket that streams policy rollouts into a session.
//!
//! Routes:
//! - `GET /catalog`
//! - `POST /sessions`
//! - `GET /sessions/{id}/state`
//! - `POST /sessions/{id}/step`
//! - `POST /sessions/{id}/export`
//! - `GET /sessions/{id}/rollout?checkpoint=PATH[&delay_ms=N]` (websocket)

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tango_core::corpus::{Demonstration, PlanStep};
use tango_core::domain::{goal as catalog_goal, MicroHome, GOAL_IDS};
use tango_core::embed::EmbeddingTable;
use tango_core::harness::applicable_actions;
use tango_core::sim::{apply, apply_with, Outcome, SimConfig, TransitionEvent};
use tango_core::world::{goal_satisfied, Action, Goal, InteractionType, WorldState};
use tango_core::{rng_from_seed, Rng};

use crate::ckpt::Checkpoint;
use crate::records::{demo_to_record, state_to_record};

pub const API: &str = "api-v1";

/// One teacher's interaction with a scene.
#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub scene_id: String,
    pub goal_id: String,
    pub goal: Goal,
    pub teacher: String,
    pub recording: bool,
    pub initial: WorldState,
    pub state: WorldState,
    pub cfg: SimConfig,
    rng: Rng,
    /// Every submitted action in order, rejected ones included.
    pub log: Vec<TransitionEvent>,
}

impl Session {
    pub fn satisfied(&self) -> bool {
        goal_satisfied(&self.state, &self.goal).unwrap_or(false)
    }

    pub fn step(&mut self, action: &Action) -> TransitionEvent {
        let (next, event) = apply(&self.state, action, &self.cfg, &mut self.rng);
        self.state = next;
        self.log.push(event.clone());
        event
    }

    pub fn history(&self) -> Vec<Action> {
        self.log.iter().map(|e| e.action.clone()).collect()
    }

    /// State obtained by replaying the log from the initial state.
    pub fn replayed(&self) -> WorldState {
        self.log.iter().filter(|e| e.outcome != Outcome::Rejected).fold(self.initial.clone(), |s, e| {
            apply_with(&s, &e.action, &self.cfg, PlanStep::from_event(e).draws()).0
        })
    }

    /// The applied part of the log as a demonstration.
    pub fn demonstration(&self) -> Demonstration {
        let mut state = self.initial.clone();
        let mut steps = Vec::new();
        for e in self.log.iter().filter(|e| e.outcome != Outcome::Rejected) {
            let p = PlanStep::from_event(e);
            let next = apply_with(&state, &e.action, &self.cfg, p.draws()).0;
            steps.push(p.into_step(state));
            state = next;
        }
        Demonstration {
            id: format!("{}/{}/{}", self.scene_id, self.goal_id, self.id),
            scene_id: self.scene_id.clone(),
            goal_id: self.goal_id.clone(),
            goal: self.goal.clone(),
            initial: self.initial.clone(),
            steps,
            teacher: self.teacher.clone(),
        }
    }

    pub fn snapshot(&self) -> Value {
        let state: Value = serde_json::from_str(&state_to_record(&self.state)).expect("state record is JSON");
        let legal: Vec<String> = applicable_actions(&self.state, &self.cfg).iter().map(|a| a.to_string()).collect();
        json!({
            "session": self.id,
            "scene": self.scene_id,
            "goal": {"id": self.goal_id, "text": self.goal.text, "constraints": self.goal.constraints},
            "state": state["state"],
            "goal_satisfied": self.satisfied(),
            "steps": self.log.len(),
            "legal_actions": legal,
        })
    }
}

/// Shared server state.
pub struct AppState {
    pub home: MicroHome,
    /// Directory relative checkpoint paths are resolved against.
    pub checkpoint_root: PathBuf,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(home: MicroHome, checkpoint_root: PathBuf) -> Arc<Self> {
        Arc::new(Self { home, checkpoint_root, sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1) })
    }

    fn session(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<Session>>, ApiError> {
        self.sessions
            .lock()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown-session", format!("no session `{id}`")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/catalog", get(catalog))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/export", post(export))
        .route("/sessions/{id}/rollout", get(rollout))
        .with_state(state)
}

pub async fn serve(addr: &str, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, body: json!({"code": code, "message": message.into()}) }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.body[key] = value;
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"api": API, "error": self.body}))).into_response()
    }
}

fn grammar() -> Value {
    InteractionType::ALL.iter().map(|i| json!({"interaction": i.token(), "arity": i.arity()})).collect()
}

async fn catalog(State(app): State<Arc<AppState>>) -> Json<Value> {
    let goals: Vec<Value> = GOAL_IDS
        .iter()
        .map(|id| json!({"id": id, "text": catalog_goal(id).map(|g| g.text).unwrap_or_default()}))
        .collect();
    Json(json!({"api": API, "scenes": app.home.scene_ids(), "goals": goals, "grammar": grammar()}))
}

#[derive(Deserialize)]
struct CreateRequest {
    scene: String,
    goal: String,
    #[serde(default)]
    teacher: String,
    /// Opt into stochastic execution errors.
    #[serde(default)]
    stochastic: bool,
    #[serde(default)]
    seed: u64,
    #[serde(default = "yes")]
    recording: bool,
}

fn yes() -> bool {
    true
}

async fn create_session(State(app): State<Arc<AppState>>, Json(req): Json<CreateRequest>) -> Result<Response, ApiError> {
    let scene = app.home.scene(&req.scene).map_err(|_| {
        ApiError::new(StatusCode::NOT_FOUND, "unknown-scene", format!("unknown scene `{}`", req.scene))
            .with("available", json!(app.home.scene_ids()))
    })?;
    let goal = catalog_goal(&req.goal).map_err(|_| {
        ApiError::new(StatusCode::NOT_FOUND, "unknown-goal", format!("unknown goal `{}`", req.goal))
            .with("available", json!(GOAL_IDS))
    })?;
    let cfg = if req.stochastic { SimConfig { seed: req.seed, ..SimConfig::default() } } else { SimConfig::deterministic() };
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed));
    let session = Session {
        id: id.clone(),
        scene_id: req.scene,
        goal_id: req.goal,
        goal,
        teacher: if req.teacher.is_empty() { "anonymous".into() } else { req.teacher },
        recording: req.recording,
        initial: scene.clone(),
        state: scene,
        rng: rng_from_seed(cfg.seed),
        cfg,
        log: Vec::new(),
    };
    let snapshot = session.snapshot();
    app.sessions.lock().expect("session map lock").insert(id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(json!({"api": API, "session": id, "snapshot": snapshot}))).into_response())
}

async fn get_state(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, ApiError> {
    let s = app.session(&id)?;
    let s = s.lock().await;
    Ok(Json(json!({"api": API, "snapshot": s.snapshot()})))
}

/// Either `"Open(fridge_0)"` or `{"interaction": .., "o1": .., "o2": ..}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum ActionInput {
    Text(String),
    Parts { interaction: String, o1: String, #[serde(default)] o2: Option<String> },
}

impl ActionInput {
    fn parse(&self) -> tango_core::Result<Action> {
        match self {
            ActionInput::Text(t) => Action::parse(t),
            ActionInput::Parts { interaction, o1, o2 } => {
                Action::new(InteractionType::from_token(interaction)?, o1.clone().into(), o2.clone().map(Into::into))
            }
        }
    }
}

#[derive(Deserialize)]
struct StepRequest {
    action: Value,
}

async fn step(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<StepRequest>,
) -> Result<Json<Value>, ApiError> {
    let s = app.session(&id)?;
    let malformed = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "malformed-action", m).with("grammar", grammar());
    let input: ActionInput = serde_json::from_value(req.action).map_err(|e| malformed(e.to_string()))?;
    let action = input.parse().map_err(|e| malformed(e.to_string()))?;
    let mut s = s.lock().await;
    let event = s.step(&action);
    Ok(Json(json!({"api": API, "event": event, "snapshot": s.snapshot(), "goal_satisfied": s.satisfied()})))
}

#[derive(Deserialize, Default)]
struct ExportRequest {
    #[serde(default)]
    partial: bool,
}

async fn export(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Option<Json<ExportRequest>>,
) -> Result<Json<Value>, ApiError> {
    let partial = body.map(|b| b.0.partial).unwrap_or(false);
    let s = app.session(&id)?;
    let s = s.lock().await;
    if !s.satisfied() && !partial {
        return Err(ApiError::new(StatusCode::CONFLICT, "goal-not-reached", "the goal does not hold yet; pass {\"partial\": true} to export anyway"));
    }
    let record: Value = serde_json::from_str(&demo_to_record(&s.demonstration())).expect("demo record is JSON");
    Ok(Json(json!({"api": API, "demo": record, "complete": s.satisfied()})))
}

#[derive(Deserialize)]
struct RolloutQuery {
    checkpoint: PathBuf,
    #[serde(default)]
    delay_ms: u64,
}

fn resolve(root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

async fn rollout(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<RolloutQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let session = app.session(&id)?;
    let path = resolve(&app.checkpoint_root, &q.checkpoint);
    let bad = |e: crate::Error| ApiError::new(StatusCode::BAD_REQUEST, "bad-checkpoint", e.to_string());
    let ckpt = Checkpoint::load(&path).map_err(bad)?;
    let table = ckpt.table().map_err(bad)?;
    let delay = Duration::from_millis(q.delay_ms);
    Ok(ws.on_upgrade(move |socket| stream_rollout(socket, session, ckpt, table, delay)))
}

async fn send(socket: &mut WebSocket, v: Value) -> bool {
    socket.send(Message::Text(v.to_string().into())).await.is_ok()
}

/// True when the client asked to stop or went away.
fn is_cancel(msg: Option<Result<Message, axum::Error>>) -> bool {
    match msg {
        None | Some(Err(_)) | Some(Ok(Message::Close(_))) => true,
        Some(Ok(Message::Text(t))) => serde_json::from_str::<Value>(&t).is_ok_and(|v| v["type"] == "cancel"),
        Some(Ok(_)) => false,
    }
}

async fn stream_rollout(mut socket: WebSocket, session: Arc<tokio::sync::Mutex<Session>>, ckpt: Checkpoint, table: EmbeddingTable, delay: Duration) {
    let mut taken = 0;
    let mut error = None;
    let mut cancelled = false;
    loop {
        tokio::select! {
            biased;
            msg = socket.recv() => {
                if is_cancel(msg) {
                    cancelled = true;
                    break;
                }
                continue;
            }
            _ = std::future::ready(()) => {}
        }
        let mut s = session.lock().await;
        if s.satisfied() || s.log.len() >= s.cfg.max_steps {
            break;
        }
        let action = match ckpt.model.predict(&s.state, &s.goal, &s.history(), &table) {
            Ok(a) => a,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        let event = s.step(&action);
        taken += 1;
        let msg = json!({
            "api": API,
            "type": "step",
            "index": taken - 1,
            "action": action.to_string(),
            "event": event,
            "snapshot": s.snapshot(),
        });
        drop(s);
        if !send(&mut socket, msg).await {
            return;
        }
        if !delay.is_zero() {
            tokio::select! {
                msg = socket.recv() => {
                    if is_cancel(msg) {
                        cancelled = true;
                        break;
                    }
                }
                _ = tokio::time::sleep(delay) => {}
            }
        }
    }
    let success = session.lock().await.satisfied();
    let mut done = json!({"api": API, "type": "done", "success": success, "steps": taken, "cancelled": cancelled});
    if let Some(e) = error {
        done["error"] = json!(e);
    }
    send(&mut socket, done).await;
    let _ = socket.send(Message::Close(None)).await;
}
