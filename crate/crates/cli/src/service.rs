//! HTTP service hosting live sessions for the console.

use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use verios_core::agents::{Agent, AgentError, BackendSpec, Mode};
use verios_core::dataset::{Dataset, Instance, Platform, ScenarioType};
use verios_core::interaction::{Event, Phase, Session, SessionConfig, SessionError, StepOutcome};
use verios_core::prompt::Exchange;
use verios_core::ScreenDims;

/// Error body returned by every route.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError { status, body: ErrorBody { code: code.into(), message: message.into() } }
    }

    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    fn unknown_session(id: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, "unknown-session", format!("no session `{id}`"))
    }

    fn internal(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> ApiError {
        let status = match e {
            SessionError::WrongPhase { .. } | SessionError::OutOfOrder(_) => StatusCode::CONFLICT,
            SessionError::Prompt(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> ApiError {
        let status = match e {
            AgentError::UnknownInstance(_) => StatusCode::NOT_FOUND,
            AgentError::BadBackendSpec(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::BAD_GATEWAY,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// A dataset entry named by id or by position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceRef {
    Index(usize),
    Id(String),
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub instance: InstanceRef,
    /// Consecutive dataset entries forming the episode, starting at
    /// `instance`. Defaults to 1.
    #[serde(default)]
    pub steps: Option<usize>,
    /// Backend spec; the service default when absent.
    #[serde(default)]
    pub backend: Option<serde_json::Value>,
    /// Overrides the backend spec's mode.
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub max_steps: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerBody {
    pub text: String,
}

/// What a client sees of one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub phase: Phase,
    pub step: u32,
    /// Length of the episode.
    pub steps: usize,
    pub mode: Mode,
    pub backend: String,
    pub instance_id: String,
    pub instruction: String,
    pub platform: Platform,
    pub screen: ScreenDims,
    pub screenshot_url: String,
    pub scenario_judged: Option<ScenarioType>,
    /// Present exactly while the session waits for an answer.
    pub pending_query: Option<String>,
    pub exchange: Option<Exchange>,
    /// Outcome of the current step once it is done.
    pub outcome: Option<StepOutcome>,
    pub outcomes: Vec<StepOutcome>,
    pub transcript: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub phase: Phase,
    pub instance_id: String,
}

struct Hosted {
    session: Session,
    agent: Box<dyn Agent>,
}

impl Hosted {
    fn view(&self, id: &str) -> SessionView {
        let s = &self.session;
        let inst = s.instance();
        let outcome = s.outcome().cloned();
        let waiting = s.phase() == Phase::AwaitingAnswer;
        SessionView {
            id: id.to_string(),
            phase: s.phase(),
            step: s.step(),
            steps: s.instances().len(),
            mode: s.config().mode,
            backend: self.agent.name(),
            instance_id: inst.id.clone(),
            instruction: inst.instruction.clone(),
            platform: inst.platform,
            screen: inst.screen,
            screenshot_url: screenshot_url(inst),
            scenario_judged: outcome.as_ref().and_then(|o| o.scenario_judged).or(s.pending().map(|d| d.scenario)),
            pending_query: if waiting { s.pending_query().map(str::to_string) } else { None },
            exchange: s.exchange().cloned(),
            outcome,
            outcomes: s.outcomes().to_vec(),
            transcript: s.transcript().to_vec(),
        }
    }
}

fn screenshot_url(inst: &Instance) -> String {
    let path = inst.screenshot.to_string_lossy().replace('\\', "/");
    let mut url = String::from("/assets/");
    for b in path.bytes() {
        if b.is_ascii_alphanumeric() || b"-._~/".contains(&b) {
            url.push(b as char);
        } else {
            url.push_str(&format!("%{b:02X}"));
        }
    }
    url
}

/// Dataset, default backend and the live sessions.
pub struct Service {
    dataset: Arc<Dataset>,
    default_backend: BackendSpec,
    default_max_steps: u32,
    assets: HashSet<PathBuf>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Hosted>>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl Service {
    pub fn new(dataset: Dataset, default_backend: BackendSpec) -> Service {
        let assets = dataset.iter().map(|i| i.screenshot.clone()).collect();
        Service {
            dataset: Arc::new(dataset),
            default_backend,
            default_max_steps: SessionConfig::<f64>::default().max_steps(),
            assets,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_max_steps(mut self, max_steps: u32) -> Service {
        self.default_max_steps = max_steps;
        self
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn create_session(&self, req: CreateSession) -> Result<SessionView, ApiError> {
        let start = match &req.instance {
            InstanceRef::Index(i) if *i < self.dataset.len() => *i,
            InstanceRef::Id(id) => self
                .dataset
                .iter()
                .position(|inst| &inst.id == id)
                .ok_or_else(|| AgentError::UnknownInstance(id.clone()))?,
            InstanceRef::Index(i) => {
                return Err(AgentError::UnknownInstance(format!("index {i} (dataset has {})", self.dataset.len())).into())
            }
        };
        let count = req.steps.unwrap_or(1);
        if count == 0 || start + count > self.dataset.len() {
            return Err(ApiError::bad_request(format!(
                "steps must be between 1 and {} from this instance",
                self.dataset.len() - start
            )));
        }
        let mut spec = match req.backend {
            Some(v) => serde_json::from_value::<BackendSpec>(v)
                .map_err(|e| AgentError::BadBackendSpec(e.to_string()))?,
            None => self.default_backend.clone(),
        };
        spec.variant = spec.variant.resolve_env();
        if let Some(mode) = req.mode {
            spec.mode = mode;
        }
        let agent = spec.build(&self.dataset)?;
        let cfg = SessionConfig::new(req.max_steps.unwrap_or(self.default_max_steps), spec.mode)?;
        let session = Session::new(self.dataset.instances[start..start + count].to_vec(), cfg)?;
        let hosted = Hosted { session, agent };
        let id = loop {
            let id = format!("{:032x}", rand::random::<u128>());
            if !lock(&self.sessions).contains_key(&id) {
                break id;
            }
        };
        let view = hosted.view(&id);
        lock(&self.sessions).insert(id, Arc::new(Mutex::new(hosted)));
        Ok(view)
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Hosted>>, ApiError> {
        lock(&self.sessions).get(id).cloned().ok_or_else(|| ApiError::unknown_session(id))
    }

    pub fn list(&self) -> Vec<SessionSummary> {
        let sessions: Vec<_> = lock(&self.sessions).iter().map(|(id, h)| (id.clone(), h.clone())).collect();
        let mut out: Vec<_> = sessions
            .into_iter()
            .map(|(id, h)| {
                let h = lock(&h);
                SessionSummary { id, phase: h.session.phase(), instance_id: h.session.instance().id.clone() }
            })
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    pub fn view(&self, id: &str) -> Result<SessionView, ApiError> {
        let hosted = self.lookup(id)?;
        let view = lock(&hosted).view(id);
        Ok(view)
    }

    /// Runs the pass the session waits for, or moves a finished step on.
    pub fn step(&self, id: &str) -> Result<SessionView, ApiError> {
        let hosted = self.lookup(id)?;
        let mut h = lock(&hosted);
        let Hosted { session, agent } = &mut *h;
        match session.phase() {
            Phase::AwaitingAgent => session.agent_pass(agent.as_ref())?,
            Phase::StepDone => session.advance()?,
            actual => return Err(SessionError::WrongPhase { expected: Phase::AwaitingAgent, actual }.into()),
        };
        Ok(h.view(id))
    }

    /// Records the human answer and runs the second pass.
    pub fn answer(&self, id: &str, text: &str) -> Result<SessionView, ApiError> {
        let hosted = self.lookup(id)?;
        let mut h = lock(&hosted);
        let Hosted { session, agent } = &mut *h;
        session.submit_answer(text)?;
        session.agent_second_pass(agent.as_ref())?;
        Ok(h.view(id))
    }

    pub fn transcript(&self, id: &str) -> Result<Vec<Event>, ApiError> {
        let hosted = self.lookup(id)?;
        let events = lock(&hosted).session.transcript().to_vec();
        Ok(events)
    }

    pub fn delete(&self, id: &str) -> Result<(), ApiError> {
        lock(&self.sessions).remove(id).map(|_| ()).ok_or_else(|| ApiError::unknown_session(id))
    }

    /// Resolves a screenshot path from the dataset to a file under its root.
    pub fn asset_path(&self, requested: &str) -> Result<PathBuf, ApiError> {
        let rel = Path::new(requested);
        if requested.is_empty() || !rel.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad-asset-path", format!("`{requested}` is not a relative path")));
        }
        let normalized: PathBuf = rel.components().collect();
        if !self.assets.iter().any(|a| a.components().collect::<PathBuf>() == normalized) {
            return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown-asset", format!("`{requested}` is not a dataset screenshot")));
        }
        Ok(self.dataset.root().join(normalized))
    }
}

type Shared = Arc<Service>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

/// Runs `f` off the async workers; agents may block on the network.
async fn blocking<R: Send + 'static>(
    svc: Shared,
    f: impl FnOnce(&Service) -> Result<R, ApiError> + Send + 'static,
) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(move || f(&svc)).await.map_err(|e| ApiError::internal(e.to_string()))?
}

async fn create(State(svc): State<Shared>, body: Bytes) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let view = blocking(svc, move |s| s.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn list(State(svc): State<Shared>) -> Result<Json<Vec<SessionSummary>>, ApiError> {
    Ok(Json(blocking(svc, |s| Ok(s.list())).await?))
}

async fn view(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(blocking(svc, move |s| s.view(&id)).await?))
}

async fn step(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(blocking(svc, move |s| s.step(&id)).await?))
}

async fn answer(State(svc): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Json<SessionView>, ApiError> {
    let AnswerBody { text } = parse_body(&body)?;
    Ok(Json(blocking(svc, move |s| s.answer(&id, &text)).await?))
}

async fn transcript(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<Vec<Event>>, ApiError> {
    Ok(Json(blocking(svc, move |s| s.transcript(&id)).await?))
}

async fn delete(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<StatusCode, ApiError> {
    svc.delete(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn asset(State(svc): State<Shared>, UrlPath(path): UrlPath<String>) -> Result<Response, ApiError> {
    let file = svc.asset_path(&path)?;
    let bytes = tokio::fs::read(&file)
        .await
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "unknown-asset", format!("{}: {e}", file.display())))?;
    let mime = match file.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such route")
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(view).delete(delete))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/assets/{*path}", get(asset))
        .fallback(fallback)
        .with_state(svc)
}

/// Serves until ctrl-c.
pub async fn serve(svc: Arc<Service>, addr: SocketAddr, ready: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    ready(listener.local_addr()?);
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
