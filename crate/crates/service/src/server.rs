//! HTTP routes. The changeset protocol lives under `/v1`; the review API is
//! mounted at both `/review` and `/v1/review`.

use std::collections::BTreeMap;
use std::future::Future;
use std::io;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime};

use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;
use tower_http::services::ServeDir;

use gm_core::osw::{Changeset, ChangesetId, ChangesetState, OswError};
use gm_core::privacy::raster_fields;
use gm_core::vetting::{VettingError, VettingRecord};

use crate::api::{
    ChangesetClosed, ChangesetOpened, ErrorBody, Health, LoginRequest, NodeCreated, NodeDocument,
    ReviewDetail, ReviewQueueItem, ReviewSubmission, UserToken, VerdictAccepted,
};
use crate::auth::{unix_seconds, Auth, AuthError};
use crate::config::{valid_workspace_id, ConfigError, ServiceConfig};
use crate::review::{ReviewError, ReviewQueue};
use crate::store::{StoreError, WorkspaceStore, LOG_EXTENSION};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

pub struct AppState {
    auth: Auth,
    workspaces: BTreeMap<String, Arc<RwLock<WorkspaceStore>>>,
    review: Mutex<ReviewQueue>,
}

impl AppState {
    /// Loads every configured workspace plus every log found in the workspace
    /// directory.
    pub fn new(config: &ServiceConfig) -> Result<Self, StartupError> {
        config.validate()?;
        let mut ids: Vec<String> = config.workspaces.clone();
        if let Some(dir) = &config.workspace_dir {
            if dir.is_dir() {
                let entries = std::fs::read_dir(dir).map_err(|source| StartupError::Io {
                    path: dir.clone(),
                    source,
                })?;
                for e in entries.flatten() {
                    let p = e.path();
                    if p.extension().is_some_and(|x| x == LOG_EXTENSION) {
                        if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                            if valid_workspace_id(stem) {
                                ids.push(stem.to_string());
                            }
                        }
                    }
                }
            }
        }
        ids.sort();
        ids.dedup();
        let mut workspaces = BTreeMap::new();
        for id in ids {
            let store = match &config.workspace_dir {
                Some(dir) => WorkspaceStore::open(dir, &id)?,
                None => WorkspaceStore::in_memory(id.clone()),
            };
            workspaces.insert(id, Arc::new(RwLock::new(store)));
        }
        Ok(Self {
            auth: Auth::new(
                config.users.clone(),
                Duration::from_secs(config.token_ttl_s),
            ),
            workspaces,
            review: Mutex::new(ReviewQueue::new(Duration::from_secs(
                config.review_lock_ttl_s,
            ))),
        })
    }

    pub fn workspace_ids(&self) -> Vec<String> {
        self.workspaces.keys().cloned().collect()
    }

    pub fn workspace(&self, id: &str) -> Option<&Arc<RwLock<WorkspaceStore>>> {
        self.workspaces.get(id)
    }

    fn store(&self, id: &str) -> Result<&Arc<RwLock<WorkspaceStore>>, ApiError> {
        self.workspace(id).ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_workspace",
                format!("workspace `{id}` does not exist"),
            )
        })
    }
}

type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<AuthError> for ApiError {
    fn from(e: AuthError) -> Self {
        let code = match e {
            AuthError::BadCredentials => "bad_credentials",
            AuthError::MissingToken => "missing_token",
            AuthError::InvalidToken => "invalid_token",
        };
        ApiError::new(StatusCode::UNAUTHORIZED, code, e.to_string())
    }
}

impl From<OswError> for ApiError {
    fn from(e: OswError) -> Self {
        use StatusCode as S;
        let (status, code) = match &e {
            OswError::Unauthenticated => (S::UNAUTHORIZED, "unauthenticated"),
            OswError::UnknownChangeset(_) => (S::NOT_FOUND, "unknown_changeset"),
            OswError::ChangesetClosed(_) => (S::CONFLICT, "changeset_closed"),
            OswError::AlreadyClosed(_) => (S::CONFLICT, "already_closed"),
            OswError::NotOwner(_) => (S::FORBIDDEN, "not_owner"),
            OswError::DuplicateNodeId(_) => (S::CONFLICT, "duplicate_node"),
            OswError::InvalidTag(_) => (S::UNPROCESSABLE_ENTITY, "invalid_tag"),
            OswError::Malformed(_) => (S::UNPROCESSABLE_ENTITY, "malformed"),
            OswError::DanglingReference { .. } => (S::INTERNAL_SERVER_ERROR, "integrity"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Osw(o) => o.into(),
            other => {
                tracing::error!(error = %other, "workspace store failure");
                ApiError::new(
                    StatusCode::INTERNAL_SERVER_ERROR,
                    "storage",
                    other.to_string(),
                )
            }
        }
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        use StatusCode as S;
        let (status, code) = match &e {
            ReviewError::UnknownCapture(_) => (S::NOT_FOUND, "unknown_capture"),
            ReviewError::NotOwner(_) => (S::FORBIDDEN, "not_owner"),
            ReviewError::Locked(_) => (S::CONFLICT, "locked"),
            ReviewError::AlreadyReviewed(_) => (S::CONFLICT, "already_reviewed"),
            ReviewError::DuplicateCapture(_) => (S::CONFLICT, "duplicate_capture"),
            ReviewError::Vetting(VettingError::UnknownInstance { .. }) => {
                (S::CONFLICT, "stale_instance")
            }
            ReviewError::Vetting(VettingError::IncompleteVetting(_)) => {
                (S::UNPROCESSABLE_ENTITY, "incomplete_vetting")
            }
            ReviewError::Vetting(_) => (S::UNPROCESSABLE_ENTITY, "invalid_record"),
            ReviewError::CaptureMismatch { .. } | ReviewError::ClassMismatch(_) => {
                (S::UNPROCESSABLE_ENTITY, "invalid_record")
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

/// Authenticated caller, from `Authorization: Bearer <token>`.
pub struct Caller {
    pub user_id: String,
    pub token: String,
}

impl FromRequestParts<Shared> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &Shared) -> Result<Self, ApiError> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or(AuthError::MissingToken)?;
        let user_id = state.auth.verify(token)?;
        Ok(Caller {
            user_id,
            token: token.to_string(),
        })
    }
}

/// JSON body whose rejections use the service's error document.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(r) => Err(ApiError::new(r.status(), "invalid_body", r.body_text())),
        }
    }
}

fn now() -> f64 {
    unix_seconds(SystemTime::now())
}

async fn health(State(s): State<Shared>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        workspaces: s.workspace_ids(),
    })
}

async fn login(
    State(s): State<Shared>,
    Body(req): Body<LoginRequest>,
) -> Result<Json<UserToken>, ApiError> {
    Ok(Json(s.auth.login(&req.user_id, &req.secret)?))
}

async fn open_changeset(
    State(s): State<Shared>,
    Path(ws): Path<String>,
    caller: Caller,
) -> Result<(StatusCode, Json<ChangesetOpened>), ApiError> {
    let store = s.store(&ws)?;
    let id = store
        .write()
        .expect("store lock")
        .open_changeset(&caller.user_id, now())?;
    Ok((
        StatusCode::CREATED,
        Json(ChangesetOpened { changeset_id: id }),
    ))
}

async fn get_changeset(
    State(s): State<Shared>,
    Path((ws, cs)): Path<(String, ChangesetId)>,
    _caller: Caller,
) -> Result<Json<Changeset>, ApiError> {
    let store = s.store(&ws)?.read().expect("store lock");
    let c = store
        .workspace()
        .changeset(cs)
        .ok_or(OswError::UnknownChangeset(cs))?;
    Ok(Json(c.clone()))
}

async fn add_node(
    State(s): State<Shared>,
    Path((ws, cs)): Path<(String, ChangesetId)>,
    caller: Caller,
    Body(doc): Body<NodeDocument>,
) -> Result<(StatusCode, Json<NodeCreated>), ApiError> {
    let store = s.store(&ws)?;
    let flagged = raster_fields(&serde_json::to_value(&doc.tags).expect("tags serialize"));
    if !flagged.is_empty() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "raster_payload",
            format!("tags look like raster data: {}", flagged.join(", ")),
        ));
    }
    let (node, key) = doc.into_parts();
    let (node_id, replayed) =
        store
            .write()
            .expect("store lock")
            .add_node(cs, &caller.user_id, node, key)?;
    let status = if replayed {
        StatusCode::OK
    } else {
        StatusCode::CREATED
    };
    Ok((status, Json(NodeCreated { node_id, replayed })))
}

async fn close_changeset(
    State(s): State<Shared>,
    Path((ws, cs)): Path<(String, ChangesetId)>,
    caller: Caller,
) -> Result<Json<ChangesetClosed>, ApiError> {
    let store = s.store(&ws)?;
    let way_id = store
        .write()
        .expect("store lock")
        .close_changeset(cs, &caller.user_id, now())?;
    Ok(Json(ChangesetClosed {
        changeset_id: cs,
        way_id,
    }))
}

async fn export(
    State(s): State<Shared>,
    Path(ws): Path<String>,
    _caller: Caller,
) -> Result<Response, ApiError> {
    let doc = s
        .store(&ws)?
        .read()
        .expect("store lock")
        .workspace()
        .to_geojson()?;
    Ok(([(CONTENT_TYPE, "application/geo+json")], doc.to_string()).into_response())
}

async fn review_submit(
    State(s): State<Shared>,
    caller: Caller,
    Body(sub): Body<ReviewSubmission>,
) -> Result<StatusCode, ApiError> {
    {
        let store = s.store(&sub.workspace_id)?.read().expect("store lock");
        check_open_owned(&store, sub.changeset_id, &caller.user_id)?;
    }
    let created = s
        .review
        .lock()
        .expect("review lock")
        .submit(&caller.user_id, sub)?;
    Ok(if created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    })
}

fn check_open_owned(
    store: &WorkspaceStore,
    cs: ChangesetId,
    user_id: &str,
) -> Result<(), OswError> {
    let c = store
        .workspace()
        .changeset(cs)
        .ok_or(OswError::UnknownChangeset(cs))?;
    if c.user_id != user_id {
        return Err(OswError::NotOwner(cs));
    }
    if c.state != ChangesetState::Open {
        return Err(OswError::ChangesetClosed(cs));
    }
    Ok(())
}

#[derive(Deserialize)]
struct QueueFilter {
    workspace_id: Option<String>,
}

async fn review_queue(
    State(s): State<Shared>,
    caller: Caller,
    Query(f): Query<QueueFilter>,
) -> Json<Vec<ReviewQueueItem>> {
    let q = s.review.lock().expect("review lock");
    Json(q.pending(
        &caller.user_id,
        f.workspace_id.as_deref(),
        SystemTime::now(),
    ))
}

async fn review_detail(
    State(s): State<Shared>,
    Path(capture): Path<String>,
    caller: Caller,
) -> Result<Json<ReviewDetail>, ApiError> {
    let mut q = s.review.lock().expect("review lock");
    Ok(Json(q.open(
        &capture,
        &caller.user_id,
        &caller.token,
        SystemTime::now(),
    )?))
}

async fn review_draft(
    State(s): State<Shared>,
    Path(capture): Path<String>,
    caller: Caller,
    Body(record): Body<VettingRecord>,
) -> Result<StatusCode, ApiError> {
    let mut q = s.review.lock().expect("review lock");
    q.save_draft(
        &capture,
        &caller.user_id,
        &caller.token,
        record,
        SystemTime::now(),
    )?;
    Ok(StatusCode::NO_CONTENT)
}

async fn review_verdict(
    State(s): State<Shared>,
    Path(capture): Path<String>,
    caller: Caller,
    Body(record): Body<VettingRecord>,
) -> Result<Json<VerdictAccepted>, ApiError> {
    let mut q = s.review.lock().expect("review lock");
    let staging = q.prepare_verdict(
        &capture,
        &caller.user_id,
        &caller.token,
        &record,
        SystemTime::now(),
    )?;
    let mut store = s.store(&staging.workspace_id)?.write().expect("store lock");
    check_open_owned(&store, staging.changeset_id, &caller.user_id)?;
    let mut staged = Vec::with_capacity(staging.nodes.len());
    for p in staging.nodes {
        let (id, _) = store.add_node(
            staging.changeset_id,
            &caller.user_id,
            p.node,
            Some(p.client_key),
        )?;
        staged.push(id);
    }
    q.finish(&capture, record, staged.clone());
    Ok(Json(VerdictAccepted {
        capture_id: capture,
        staged_node_ids: staged,
    }))
}

fn review_routes() -> Router<Shared> {
    Router::new()
        .route("/queue", get(review_queue))
        .route("/items", post(review_submit))
        .route("/{capture_id}", get(review_detail))
        .route("/{capture_id}/draft", put(review_draft))
        .route("/{capture_id}/verdict", post(review_verdict))
}

/// All routes; with `ui_dir`, unmatched paths are served from that directory.
pub fn router(state: Shared, ui_dir: Option<&FsPath>) -> Router {
    let v1 = Router::new()
        .route("/health", get(health))
        .route("/login", post(login))
        .route("/workspaces/{ws}/changesets", post(open_changeset))
        .route("/workspaces/{ws}/changesets/{cs}", get(get_changeset))
        .route("/workspaces/{ws}/changesets/{cs}/nodes", post(add_node))
        .route(
            "/workspaces/{ws}/changesets/{cs}/close",
            put(close_changeset),
        )
        .route("/workspaces/{ws}/export", get(export))
        .nest("/review", review_routes());
    let app = Router::new()
        .route("/health", get(health))
        .nest("/v1", v1)
        .nest("/review", review_routes());
    let app = match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    };
    app.with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> io::Result<()> {
    axum::serve(listener, app).await
}

pub async fn serve_until(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
}
