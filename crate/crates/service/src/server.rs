//! HTTP and WebSocket front end with the session driver.
//!
//! Each session's core sits behind one mutex, so events are applied in a
//! single total order. Journal lines are written before the resulting
//! frames are broadcast.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::broadcast;

use coplan_core::agents::{robot_execute, DurationDist, RobotModel};
use coplan_core::graph::AndOrGraph;
use coplan_core::model::{default_palletization, load_model, parse_model, AgentKind, ModelError};
use coplan_core::time::Micros;

use crate::proto::{parse_inbound, Outbound, ProtoError, PROTO_VERSION};
use crate::session::{Effect, Input, JournalEntry, SessionCore, Snapshot};

/// Where a session's model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRef {
    /// The palletization task with this many parts.
    Palletize(usize),
    /// A model file on the server.
    Path(PathBuf),
    /// A model document in the request.
    Inline(Value),
}

/// Body of `POST /session`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub model: ModelRef,
    #[serde(default)]
    pub robot: Option<RobotModel>,
    /// Wall-clock seconds a human turn may take.
    #[serde(default)]
    pub timeout: Option<f64>,
    /// Wall-clock seconds per virtual second of robot motion.
    #[serde(default)]
    pub time_scale: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum CreateError {
    #[error("model not found: {0}")]
    ModelNotFound(String),
    #[error("invalid model: {0}")]
    ModelInvalid(String),
}

impl CreateError {
    fn code(&self) -> &'static str {
        match self {
            CreateError::ModelNotFound(_) => "model_not_found",
            CreateError::ModelInvalid(_) => "model_invalid",
        }
    }
}

impl IntoResponse for CreateError {
    fn into_response(self) -> Response {
        let status = match self {
            CreateError::ModelNotFound(_) => StatusCode::NOT_FOUND,
            CreateError::ModelInvalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let body = json!({ "code": self.code(), "message": self.to_string() });
        (status, Json(body)).into_response()
    }
}

/// Robot durations used when a request does not bring its own.
pub fn default_robot() -> RobotModel {
    let d = |v| DurationDist::Constant(v);
    RobotModel {
        durations: [
            ("approach-part", d(6.0)),
            ("grasp", d(2.0)),
            ("approach-goal", d(10.0)),
            ("ungrasp", d(1.5)),
            ("start-pose", d(7.3)),
            ("assemble", d(5.0)),
            ("fix", d(4.0)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect(),
        ..RobotModel::default()
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub log_dir: Option<PathBuf>,
    pub timeout: f64,
    pub time_scale: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            log_dir: None,
            timeout: 120.0,
            time_scale: 0.1,
        }
    }
}

impl ServiceConfig {
    /// Reads `COPLAN_LOG_DIR`.
    pub fn from_env() -> Self {
        ServiceConfig {
            log_dir: std::env::var_os("COPLAN_LOG_DIR").map(PathBuf::from),
            ..ServiceConfig::default()
        }
    }
}

type Frame = Arc<(Option<u64>, String)>;

struct Live {
    core: SessionCore,
    rng: ChaCha8Rng,
    journal: Option<File>,
    next_client: u64,
}

pub struct Session {
    id: String,
    live: Mutex<Live>,
    tx: broadcast::Sender<Frame>,
    started: Instant,
    robot: RobotModel,
    timeout: Duration,
    time_scale: f64,
}

impl Session {
    fn lock(&self) -> MutexGuard<'_, Live> {
        self.live.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn now(&self) -> Micros {
        Micros(self.started.elapsed().as_micros() as u64)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn snapshot(&self) -> Snapshot {
        self.lock().core.snapshot()
    }

    /// A copy of the core, e.g. to compare against a replay.
    pub fn core(&self) -> SessionCore {
        self.lock().core.clone()
    }

    fn send(&self, to: Option<u64>, msg: &Outbound) {
        // no receivers is fine
        let _ = self.tx.send(Arc::new((to, msg.to_frame())));
    }

    /// Applies `input` now. Rejections are returned as `error` frames for
    /// the caller only.
    fn handle(self: &Arc<Self>, input: Input, client: Option<u64>) -> Result<(), ProtoError> {
        let mut live = self.lock();
        let at = self.now();
        match live.core.apply(input.clone(), at) {
            Ok(applied) => {
                if let Some(file) = live.journal.as_mut() {
                    let line =
                        serde_json::to_string(&JournalEntry { at, input }).unwrap_or_default();
                    if let Err(e) = writeln!(file, "{line}") {
                        tracing::warn!(session = %self.id, "journal write failed: {e}");
                    }
                }
                for msg in &applied.messages {
                    self.send(None, msg);
                }
                for effect in applied.effects {
                    self.schedule(&mut live, effect);
                }
                Ok(())
            }
            Err(err) => {
                if client.is_some() {
                    let msg = live.core.error_message(&err);
                    self.send(client, &msg);
                }
                Err(err)
            }
        }
    }

    fn schedule(self: &Arc<Self>, live: &mut Live, effect: Effect) {
        let session = Arc::clone(self);
        match effect {
            Effect::RunRobot { seq, action } => {
                let (delay, outcome) =
                    match robot_execute(&self.robot, &action, false, &mut live.rng) {
                        Ok(out) => (out.duration.scale(self.time_scale), out.outcome),
                        Err(e) => {
                            tracing::warn!(session = %self.id, "{e}; treating {action} as instant");
                            (Micros::ZERO, coplan_core::manager::Outcome::Success)
                        }
                    };
                tokio::spawn(async move {
                    tokio::time::sleep(Duration::from_micros(delay.0)).await;
                    // a stop may have superseded this action
                    let _ = session.handle(Input::RobotFinished { seq, outcome }, None);
                });
            }
            Effect::ArmTimeout { seq } => {
                let timeout = self.timeout;
                tokio::spawn(async move {
                    tokio::time::sleep(timeout).await;
                    let _ = session.handle(Input::TimeoutExpired { seq }, None);
                });
            }
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<AppInner>,
}

struct AppInner {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState {
            inner: Arc::new(AppInner {
                config,
                sessions: Mutex::new(HashMap::new()),
            }),
        }
    }

    fn sessions(&self) -> MutexGuard<'_, HashMap<String, Arc<Session>>> {
        self.inner
            .sessions
            .lock()
            .unwrap_or_else(|p| p.into_inner())
    }

    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions().get(id).cloned()
    }

    /// Creates and starts a session. Must run inside a Tokio runtime.
    /// Returns the session and its initial frames.
    pub fn create_session(
        &self,
        req: &CreateSession,
    ) -> Result<(Arc<Session>, Vec<Outbound>), CreateError> {
        let spec =
            match &req.model {
                ModelRef::Palletize(k) => default_palletization(*k)
                    .map_err(|e| CreateError::ModelInvalid(e.to_string()))?,
                ModelRef::Path(p) => load_model(p).map_err(|e| match e {
                    ModelError::Io { .. } => CreateError::ModelNotFound(e.to_string()),
                    other => CreateError::ModelInvalid(other.to_string()),
                })?,
                ModelRef::Inline(v) => parse_model(&v.to_string())
                    .map_err(|e| CreateError::ModelInvalid(e.to_string()))?,
            };
        let robot = req.robot.clone().unwrap_or_else(default_robot);
        robot
            .validate()
            .map_err(|e| CreateError::ModelInvalid(e.to_string()))?;
        for arc in &spec.arcs {
            for a in &arc.actions {
                if a.agent == AgentKind::Robot && !robot.durations.contains_key(&a.name) {
                    return Err(CreateError::ModelInvalid(format!(
                        "no robot duration for action {:?}",
                        a.name
                    )));
                }
            }
        }
        let graph =
            AndOrGraph::load(&spec).map_err(|e| CreateError::ModelInvalid(e.to_string()))?;
        let id = uuid::Uuid::new_v4().to_string();
        let (core, applied) = SessionCore::new(id.clone(), graph)
            .map_err(|e| CreateError::ModelInvalid(e.to_string()))?;

        let cfg = &self.inner.config;
        let journal = cfg.log_dir.as_ref().and_then(|dir| {
            let path = dir.join(format!("{id}.jsonl"));
            let opened = std::fs::create_dir_all(dir).and_then(|_| {
                let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
                writeln!(f, "{}", json!({ "create": req }))?;
                Ok(f)
            });
            opened
                .map_err(|e| tracing::warn!("cannot open journal {}: {e}", path.display()))
                .ok()
        });
        let (tx, _) = broadcast::channel(256);
        let session = Arc::new(Session {
            id: id.clone(),
            live: Mutex::new(Live {
                core,
                rng: ChaCha8Rng::seed_from_u64(req.seed.unwrap_or(0)),
                journal,
                next_client: 0,
            }),
            tx,
            started: Instant::now(),
            robot,
            timeout: Duration::from_secs_f64(req.timeout.unwrap_or(cfg.timeout).max(0.0)),
            time_scale: req.time_scale.unwrap_or(cfg.time_scale).max(0.0),
        });
        {
            let mut live = session.lock();
            for effect in applied.effects {
                session.schedule(&mut live, effect);
            }
        }
        self.sessions().insert(id, Arc::clone(&session));
        tracing::info!(session = %session.id, model = %spec.name, "session created");
        Ok((session, applied.messages))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/session", post(create))
        .route("/session/{id}", get(snapshot))
        .route("/session/{id}/ws", get(ws))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn healthz(State(app): State<AppState>) -> Json<Value> {
    let sessions = app.sessions().len();
    Json(json!({ "status": "ok", "proto": PROTO_VERSION, "sessions": sessions }))
}

async fn create(
    State(app): State<AppState>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<Value>), CreateError> {
    let (session, messages) = app.create_session(&req)?;
    let id = session.id().to_string();
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "session": id,
            "proto": PROTO_VERSION,
            "ws": format!("/session/{id}/ws"),
            "messages": messages,
        })),
    ))
}

fn not_found(id: &str) -> Response {
    let body = json!({ "code": "session_not_found", "message": format!("no session {id}") });
    (StatusCode::NOT_FOUND, Json(body)).into_response()
}

async fn snapshot(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    match app.session(&id) {
        Some(s) => Json(s.snapshot()).into_response(),
        None => not_found(&id),
    }
}

async fn ws(ws: WebSocketUpgrade, State(app): State<AppState>, Path(id): Path<String>) -> Response {
    match app.session(&id) {
        Some(session) => ws.on_upgrade(move |socket| client(socket, session)),
        None => not_found(&id),
    }
}

async fn client(socket: WebSocket, session: Arc<Session>) {
    let (mut sink, mut stream) = socket.split();
    let mut rx = session.tx.subscribe();
    let me = {
        let mut live = session.lock();
        live.next_client += 1;
        let me = live.next_client;
        let greeting = live.core.state_message();
        session.send(Some(me), &greeting);
        me
    };
    loop {
        tokio::select! {
            frame = rx.recv() => match frame {
                Ok(frame) => {
                    let (to, text) = &*frame;
                    if to.is_none_or(|t| t == me)
                        && sink.send(Message::Text(text.clone().into())).await.is_err()
                    {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(session = %session.id, "client {me} lagged by {n} frames");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    match parse_inbound(text.as_str(), &session.id) {
                        Ok(event) => {
                            let _ = session.handle(Input::Client { event }, Some(me));
                        }
                        Err(err) => {
                            let msg = session.lock().core.error_message(&err);
                            session.send(Some(me), &msg);
                        }
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let err = ProtoError::new(crate::proto::ErrorCode::Malformed, "binary frames are not supported");
                    let msg = session.lock().core.error_message(&err);
                    session.send(Some(me), &msg);
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
}
