//! HTTP binding of the session store.
//!
//! Errors are returned as `text/plain` bodies of one line, `kind: detail`,
//! where `kind` is the stable tag from [`spherelight::Error::kind`].

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use spherelight::codec::encode_sh;
use spherelight::{Error, Vec3};
use tokio::sync::oneshot;

use crate::store::{SessionDescriptor, SessionStore};

pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::InvalidArgument(_) | Error::MalformedRecording(_) => StatusCode::BAD_REQUEST,
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::MalformedPacket(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::InsufficientObservation => StatusCode::CONFLICT,
        Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

/// One-line `kind: detail` reason.
pub fn reason(e: &Error) -> String {
    let detail = match e {
        Error::InvalidArgument(m) | Error::NotFound(m) | Error::MalformedRecording(m) => m.clone(),
        Error::MalformedPacket(p) => p.to_string(),
        Error::InsufficientObservation => "no initialized anchors".to_string(),
        Error::Io(io) => io.to_string(),
    };
    format!("{}: {}", e.kind(), detail.replace(['\r', '\n'], " "))
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(&self.0);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        } else {
            tracing::debug!(error = %self.0, "request rejected");
        }
        (status, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], reason(&self.0) + "\n").into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError(Error::InvalidArgument(format!("request body: {e}"))))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSession {
    pub anchor_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegisterPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PositionCreated {
    pub position_id: u32,
}

#[derive(Debug, Default, Deserialize)]
struct EstimateQuery {
    #[serde(default)]
    share: bool,
}

async fn create_session(State(store): State<Arc<SessionStore>>, body: Bytes) -> ApiResult<Json<SessionCreated>> {
    let req: CreateSession = parse_json(&body)?;
    let session_id = store.create_session(req.anchor_count)?;
    tracing::info!(%session_id, anchor_count = req.anchor_count, "session created");
    Ok(Json(SessionCreated { session_id }))
}

async fn join_session(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionDescriptor>> {
    Ok(Json(store.join_session(&id)?))
}

async fn register_position(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<PositionCreated>> {
    let req: RegisterPosition = parse_json(&body)?;
    let position_id = store.register_position(&id, Vec3::new(req.x, req.y, req.z))?;
    Ok(Json(PositionCreated { position_id }))
}

async fn estimate(
    State(store): State<Arc<SessionStore>>,
    Path((id, pid)): Path<(String, String)>,
    Query(query): Query<EstimateQuery>,
    body: Bytes,
) -> ApiResult<Response> {
    let pid: u32 = pid.parse().map_err(|_| Error::NotFound(format!("position {pid} in session {id}")))?;
    let share = query.share;
    // Decode, merge and projection are CPU-bound; keep them off the reactor.
    let sh = tokio::task::spawn_blocking(move || store.estimate(&id, pid, &body, share))
        .await
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))??;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], encode_sh(&sh)).into_response())
}

async fn fallback() -> ApiError {
    ApiError(Error::NotFound("no such route".into()))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(join_session))
        .route("/sessions/{id}/positions", post(register_position))
        .route("/sessions/{id}/positions/{pid}/estimate", post(estimate))
        .fallback(fallback)
        .with_state(store)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: Arc<SessionStore>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store)).with_graceful_shutdown(shutdown).await
}

/// A server on its own thread and runtime, for blocking callers such as the
/// replay driver and tests. Stops when dropped.
pub struct BackgroundServer {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    pub fn start(store: Arc<SessionStore>, addr: SocketAddr) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name("edge-server".into()).spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                serve(listener, store, async move {
                    let _ = stopped.await;
                })
                .await
            })
        })?;
        Ok(Self { addr, stop: Some(stop), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
