//! Local HTTP service for stepwise, undoable scene inpainting.
//!
//! Each session owns an append-only history of scene states. Mutating
//! requests on one session are serialized; renders read committed
//! snapshots. Errors are JSON bodies `{"error": {"code", "message"}}`.

mod error;
mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gsfill_core::pipeline::{InpaintConfig, StepRecord};
use gsfill_core::{dilate_mask, Error};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use error::{ApiError, ApiJson, ApiPath, ApiQuery, ApiResult};
pub use session::{state_hash, Session, ViewInfo, THUMBNAIL_SIDE};

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    next_id: AtomicU64,
}

impl AppState {
    fn get(&self, id: &str) -> ApiResult<Arc<Session>> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session `{id}`")))
    }

    /// Registers a session and returns its id.
    pub fn insert(&self, session: Session) -> String {
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed) + 1);
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), Arc::new(session));
        id
    }
}

pub fn router() -> Router {
    router_with(Arc::new(AppState::default()))
}

pub fn router_with(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/views", get(views))
        .route("/sessions/{id}/render", get(render))
        .route("/sessions/{id}/mask", post(upload_mask))
        .route("/sessions/{id}/masks/{mask}", get(get_mask))
        .route("/sessions/{id}/image", post(upload_image))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/pointcloud", get(pointcloud))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/state", get(session_state))
        .with_state(state)
}

/// Serves on `addr`, which must be a loopback address.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    if !addr.ip().is_loopback() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("refusing to bind non-loopback address {addr}"),
        ));
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router()).await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub scene: PathBuf,
    pub cameras: PathBuf,
    /// TOML run configuration; defaults when absent.
    pub config: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Created {
    id: String,
    state_hash: String,
    views: Vec<String>,
}

async fn create_session(State(app): State<Arc<AppState>>, ApiJson(req): ApiJson<CreateSession>) -> ApiResult<Response> {
    let session = blocking(move || {
        let cfg = match &req.config {
            Some(p) => InpaintConfig::load(p)?,
            None => InpaintConfig::default(),
        };
        Ok(Session::open(&req.scene, &req.cameras, cfg)?)
    })
    .await?;
    let state_hash = session.current_hash();
    let views = session.cameras.iter().map(|c| c.name.clone()).collect();
    let id = app.insert(session);
    Ok((StatusCode::CREATED, Json(Created { id, state_hash, views })).into_response())
}

async fn views(State(app): State<Arc<AppState>>, ApiPath(id): ApiPath<String>) -> ApiResult<Json<Vec<ViewInfo>>> {
    let s = app.get(&id)?;
    Ok(Json(blocking(move || Ok(s.views())).await?))
}

fn resolve_view(s: &Session, view: &str) -> ApiResult<usize> {
    s.view_index(view)
        .ok_or_else(|| ApiError::not_found(format!("no view `{view}`")))
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    #[default]
    Color,
    Depth,
    Alpha,
}

#[derive(Debug, Deserialize)]
struct RenderQuery {
    view: String,
    #[serde(default)]
    mode: RenderMode,
    /// History index; the current state when absent.
    state: Option<usize>,
}

async fn render(
    State(app): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiQuery(q): ApiQuery<RenderQuery>,
) -> ApiResult<Response> {
    let s = app.get(&id)?;
    let view = resolve_view(&s, &q.view)?;
    let scene = s
        .scene(q.state)
        .ok_or_else(|| ApiError::not_found(format!("no state {}", q.state.unwrap_or_default())))?;
    let (body, mime) = blocking(move || {
        let out = s.render(&scene, view);
        Ok(match q.mode {
            RenderMode::Color => (out.color.encode_png(), "image/png"),
            RenderMode::Alpha => (out.alpha_png(), "image/png"),
            RenderMode::Depth => (out.depth.encode_tiff(), "image/tiff"),
        })
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, mime)], body).into_response())
}

#[derive(Debug, Deserialize)]
struct ViewQuery {
    view: String,
}

async fn upload_mask(
    State(app): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiQuery(q): ApiQuery<ViewQuery>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let s = app.get(&id)?;
    let view = resolve_view(&s, &q.view)?;
    let _guard = s.mutation.lock().await;
    let (mask_id, pixels, dilated) = s.add_mask(view, &body)?;
    Ok(Json(json!({
        "mask_id": mask_id,
        "view": s.cameras[view].name,
        "pixels": pixels,
        "dilated_pixels": dilated,
    })))
}

#[derive(Debug, Deserialize)]
struct MaskQuery {
    /// Return the mask as uploaded instead of the dilated one.
    #[serde(default)]
    raw: bool,
}

async fn get_mask(
    State(app): State<Arc<AppState>>,
    ApiPath((id, mask)): ApiPath<(String, usize)>,
    ApiQuery(q): ApiQuery<MaskQuery>,
) -> ApiResult<Response> {
    let s = app.get(&id)?;
    let stored = s
        .read()
        .masks
        .get(mask)
        .map(|m| m.value.clone())
        .ok_or_else(|| ApiError::not_found(format!("no mask {mask}")))?;
    let out = if q.raw { stored } else { dilate_mask(&stored, s.cfg.dilation_radius) };
    Ok(([(header::CONTENT_TYPE, "image/png")], out.encode_png()).into_response())
}

async fn upload_image(
    State(app): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiQuery(q): ApiQuery<ViewQuery>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let s = app.get(&id)?;
    let view = resolve_view(&s, &q.view)?;
    let _guard = s.mutation.lock().await;
    let image_id = s.add_image(view, &body)?;
    Ok(Json(json!({ "image_id": image_id, "view": s.cameras[view].name })))
}

/// One progressive step from uploaded inputs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    pub view: String,
    pub mask: usize,
    pub image: usize,
    /// Overrides `backend.kind`, e.g. `"harmonic"` or `"diffusion"`.
    pub backend: Option<String>,
    /// Partial configuration merged over the session configuration.
    pub overrides: Option<Value>,
}

#[derive(Debug, Serialize)]
struct StepResponse {
    step: usize,
    state_hash: String,
    record: StepRecord,
}

/// Recursively overlays `patch` onto `base`.
fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

/// Session configuration with request overrides applied.
pub fn step_config(base: &InpaintConfig, backend: Option<&str>, overrides: Option<Value>) -> gsfill_core::Result<InpaintConfig> {
    let mut value = serde_json::to_value(base).expect("config serializes");
    if let Some(patch) = overrides {
        merge_json(&mut value, patch);
    }
    if let Some(kind) = backend {
        merge_json(&mut value, json!({ "backend": { "kind": kind } }));
    }
    let cfg: InpaintConfig =
        serde_json::from_value(value).map_err(|e| Error::Schema(format!("config overrides: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

async fn step(
    State(app): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiJson(req): ApiJson<StepRequest>,
) -> ApiResult<Json<StepResponse>> {
    let s = app.get(&id)?;
    let view = resolve_view(&s, &req.view)?;
    let cfg = step_config(&s.cfg, req.backend.as_deref(), req.overrides)?;
    let reference = s.reference(view, req.mask, req.image)?;
    let _guard = s.mutation.lock().await;
    let worker = s.clone();
    let (step, record) = blocking(move || Ok(worker.step(&reference, &cfg)?)).await?;
    Ok(Json(StepResponse {
        step,
        state_hash: s.current_hash(),
        record,
    }))
}

#[derive(Debug, Deserialize)]
struct StepQuery {
    /// 1-based step index.
    step: usize,
}

async fn pointcloud(
    State(app): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiQuery(q): ApiQuery<StepQuery>,
) -> ApiResult<Response> {
    let s = app.get(&id)?;
    let ply = {
        let data = s.read();
        let record = q
            .step
            .checked_sub(1)
            .and_then(|k| data.history.steps().get(k))
            .ok_or_else(|| ApiError::not_found(format!("no step {}", q.step)))?;
        record.artifacts.cloud.to_ascii_ply()
    };
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], ply).into_response())
}

async fn undo(State(app): State<Arc<AppState>>, ApiPath(id): ApiPath<String>) -> ApiResult<Json<Value>> {
    let s = app.get(&id)?;
    let _guard = s.mutation.lock().await;
    if !s.undo() {
        return Err(ApiError::new(StatusCode::CONFLICT, "nothing_to_undo", "session is at its initial state"));
    }
    let data = s.read();
    Ok(Json(json!({
        "steps": data.history.steps().len(),
        "state_hash": state_hash(data.history.current()),
    })))
}

async fn session_state(State(app): State<Arc<AppState>>, ApiPath(id): ApiPath<String>) -> ApiResult<Json<Value>> {
    let s = app.get(&id)?;
    let data = s.read();
    let states: Vec<String> = data.history.states().iter().map(state_hash).collect();
    Ok(Json(json!({
        "state_hash": states.last(),
        "states": states,
        "steps": data.history.steps(),
        "masks": data.masks.len(),
        "images": data.images.len(),
        "config": s.cfg,
    })))
}
