//! HTTP sessions over the sequential clearing engine.
//!
//! A session holds one engine state. Requests to the same session are
//! serialized by a per-session mutex; different sessions never share state.
//! Idle sessions are dropped after a configurable time.

pub mod wire;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State as Extract};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tower_http::services::ServeDir;

use seqclear_core::gadgets::build;
use seqclear_core::{Error as CoreError, NamedModel, Rational, State};

use wire::{
    state_view, updatable_view, CreateSession, Created, EquilibriumView, Num, StateView,
    StepRequest,
};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Directory with the built web UI, served at `/`.
    pub static_dir: Option<PathBuf>,
    pub idle_ttl: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            static_dir: None,
            idle_ttl: Duration::from_secs(30 * 60),
        }
    }
}

/// Error body: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session `{id}`"),
        )
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let status = match e {
            CoreError::NotUpdatable(_) | CoreError::NothingToUndo => StatusCode::CONFLICT,
            CoreError::UnknownBank(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct Session {
    state: State,
    model: NamedModel,
    roles: BTreeMap<String, String>,
    parent: Option<String>,
    touched: Instant,
}

impl Session {
    fn view(&self, id: &str) -> StateView {
        state_view(
            id,
            self.parent.as_deref(),
            self.model.name(),
            &self.roles,
            &self.state,
        )
    }
}

/// In-memory session table.
pub struct Store {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    idle_ttl: Duration,
}

impl Store {
    pub fn new(idle_ttl: Duration) -> Self {
        Store {
            sessions: RwLock::new(HashMap::new()),
            idle_ttl,
        }
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn insert(&self, session: Session) -> (String, StateView) {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let view = session.view(&id);
        self.sessions
            .write()
            .expect("store lock")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        (id, view)
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))
    }

    /// Runs `f` with the session locked and marks it as used.
    fn with<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        let entry = self.get(id)?;
        let mut session = entry.lock().unwrap_or_else(|p| p.into_inner());
        session.touched = Instant::now();
        f(&mut session)
    }

    /// Drops sessions idle for longer than the configured time.
    pub fn sweep(&self) -> usize {
        let now = Instant::now();
        let mut sessions = self.sessions.write().expect("store lock");
        let before = sessions.len();
        sessions.retain(|_, s| match s.try_lock() {
            Ok(s) => now.duration_since(s.touched) <= self.idle_ttl,
            Err(_) => true,
        });
        before - sessions.len()
    }
}

type Shared = Arc<Store>;

async fn create(
    Extract(store): Extract<Shared>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let Json(req) = body?;
    store.sweep();
    let model: NamedModel = req.model.parse()?;
    let (system, roles) = match (req.network, req.gadget) {
        (Some(file), None) => (file.to_system::<Rational>()?, file.roles),
        (None, Some(kind)) => {
            let bp = build::<Rational>(&kind, &req.params)?;
            (bp.system, bp.roles)
        }
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "malformed_body",
                "give exactly one of `network` or `gadget`",
            ))
        }
    };
    let (session_id, state) = store.insert(Session {
        state: State::initial(system, model.policy()),
        model,
        roles,
        parent: None,
        touched: Instant::now(),
    });
    Ok((StatusCode::CREATED, Json(Created { session_id, state })))
}

async fn show(Extract(store): Extract<Shared>, Path(id): Path<String>) -> ApiResult<StateView> {
    store.with(&id, |s| Ok(Json(s.view(&id))))
}

async fn updatable(
    Extract(store): Extract<Shared>,
    Path(id): Path<String>,
) -> ApiResult<wire::Updatable> {
    store.with(&id, |s| Ok(Json(updatable_view(&s.state))))
}

async fn step(
    Extract(store): Extract<Shared>,
    Path(id): Path<String>,
    body: Result<Json<StepRequest>, JsonRejection>,
) -> ApiResult<StateView> {
    let Json(req) = body?;
    store.with(&id, |s| {
        s.state.step(&req.bank)?;
        Ok(Json(s.view(&id)))
    })
}

async fn undo(Extract(store): Extract<Shared>, Path(id): Path<String>) -> ApiResult<StateView> {
    store.with(&id, |s| {
        s.state.undo()?;
        Ok(Json(s.view(&id)))
    })
}

async fn branch(
    Extract(store): Extract<Shared>,
    Path(id): Path<String>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let copy = store.with(&id, |s| {
        Ok(Session {
            state: s.state.clone(),
            model: s.model,
            roles: s.roles.clone(),
            parent: Some(id.clone()),
            touched: Instant::now(),
        })
    })?;
    let (session_id, state) = store.insert(copy);
    Ok((StatusCode::CREATED, Json(Created { session_id, state })))
}

async fn equilibrium(
    Extract(store): Extract<Shared>,
    Path(id): Path<String>,
) -> ApiResult<EquilibriumView> {
    store.with(&id, |s| {
        let system = s.state.system();
        let check = system.is_equilibrium(s.state.rates())?;
        let residuals = check
            .residuals
            .iter()
            .enumerate()
            .map(|(v, r)| (system.id(v).to_string(), Num::from(r)))
            .collect();
        Ok(Json(EquilibriumView {
            holds: check.holds,
            residuals,
        }))
    })
}

const FALLBACK_INDEX: &str = "<!doctype html>
<title>seqclear</title>
<p>The web UI is not built. The session API lives under <code>/sessions</code>.</p>
";

/// Builds the router; `store` is shared with the caller so tests can inspect it.
pub fn router(store: Shared, config: &ServiceConfig) -> Router {
    let api = Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/updatable", get(updatable))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/branch", post(branch))
        .route("/sessions/{id}/equilibrium", get(equilibrium))
        .with_state(store);
    match &config.static_dir {
        Some(dir) if dir.is_dir() => api.fallback_service(ServeDir::new(dir)),
        _ => api.route("/", get(|| async { Html(FALLBACK_INDEX) })),
    }
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let store = Arc::new(Store::new(config.idle_ttl));
    let sweeper = Arc::clone(&store);
    let period = config
        .idle_ttl
        .min(Duration::from_secs(60))
        .max(Duration::from_secs(1));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.sweep();
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store, &config)).await
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(addr, config))
}
