//! HTTP scoring service: `GET /api/v1/health` and multipart
//! `POST /api/v1/predict` (field `image`, PNG or PGM).
//!
//! No authentication. The default bind address is loopback; put a reverse
//! proxy in front for anything else. Uploads are scored in memory and
//! dropped.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::imaging::{ImagingError, PreprocessConfig};
use crate::screen::{ScreenError, Screener};

pub const DEFAULT_MAX_UPLOAD: usize = 5 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub model_path: PathBuf,
    pub max_upload_bytes: usize,
    pub preprocess_config: Option<PathBuf>,
    pub request_timeout: Duration,
    /// `None` allows any origin.
    pub cors_origin: Option<String>,
}

impl ServiceConfig {
    pub fn new(model_path: impl Into<PathBuf>) -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            model_path: model_path.into(),
            max_upload_bytes: DEFAULT_MAX_UPLOAD,
            preprocess_config: None,
            request_timeout: Duration::from_secs(30),
            cors_origin: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("max upload must be positive")]
    BadConfig,
    #[error("preprocess config: {0}")]
    PreprocessConfig(#[from] ImagingError),
    #[error("model load failed: {0}")]
    ModelLoadFailure(#[from] ScreenError),
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: SocketAddr, source: std::io::Error },
    #[error("bad CORS origin `{0}`")]
    BadOrigin(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Closed set of machine-readable error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UndecodableImage,
    NoInk,
    TraceTooLarge,
    MalformedMultipart,
    PayloadTooLarge,
    UnsupportedMediaType,
    MissingField,
    Timeout,
    NotFound,
    MethodNotAllowed,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::UndecodableImage
            | ErrorCode::NoInk
            | ErrorCode::TraceTooLarge
            | ErrorCode::MalformedMultipart => StatusCode::BAD_REQUEST,
            ErrorCode::PayloadTooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            ErrorCode::UnsupportedMediaType => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            ErrorCode::MissingField => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Timeout => StatusCode::SERVICE_UNAVAILABLE,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::MethodNotAllowed => StatusCode::METHOD_NOT_ALLOWED,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
    /// Only set for internal errors; matches a server log line.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorBody,
}

#[derive(Debug)]
pub struct ApiError(ErrorBody);

impl ApiError {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError(ErrorBody { code, message: message.into(), id: None })
    }

    fn internal(detail: impl std::fmt::Display) -> Self {
        static COUNTER: AtomicU64 = AtomicU64::new(0);
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let id = format!("{stamp:x}-{:x}", COUNTER.fetch_add(1, Ordering::Relaxed));
        log::error!("internal error {id}: {detail}");
        ApiError(ErrorBody {
            code: ErrorCode::Internal,
            message: "internal error".into(),
            id: Some(id),
        })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0.code.status(), Json(ErrorResponse { error: self.0 })).into_response()
    }
}

impl From<ScreenError> for ApiError {
    fn from(e: ScreenError) -> Self {
        match e {
            ScreenError::Imaging(ImagingError::NoInk) => ApiError::new(ErrorCode::NoInk, "the page has no ink"),
            ScreenError::Imaging(
                e @ (ImagingError::UnsupportedFormat(_)
                | ImagingError::UnreadableFile(_)
                | ImagingError::InvalidRaster(_)
                | ImagingError::EmptyImage),
            ) => ApiError::new(ErrorCode::UndecodableImage, e.to_string()),
            ScreenError::Imaging(e @ ImagingError::TargetTooSmall { .. }) => {
                ApiError::new(ErrorCode::TraceTooLarge, e.to_string())
            }
            other => ApiError::internal(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessEcho {
    pub canvas_w: usize,
    pub canvas_h: usize,
    pub sigma: f64,
    pub radius: usize,
    pub border: String,
    pub ink_threshold: f64,
}

impl From<&PreprocessConfig> for PreprocessEcho {
    fn from(c: &PreprocessConfig) -> Self {
        Self {
            canvas_w: c.canvas_w,
            canvas_h: c.canvas_h,
            sigma: c.sigma,
            radius: c.radius,
            border: c.border.to_string(),
            ink_threshold: c.ink_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub probability_patient: f64,
    pub label: String,
    pub model_arch: String,
    pub model_checksum: String,
    pub preprocess_echo: PreprocessEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model_arch: String,
    pub model_checksum: String,
    pub uptime_seconds: f64,
}

#[derive(Debug)]
pub struct AppState {
    screener: Screener,
    started: Instant,
    request_timeout: Duration,
}

impl AppState {
    pub fn new(screener: Screener, request_timeout: Duration) -> Self {
        Self { screener, started: Instant::now(), request_timeout }
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok".into(),
        model_arch: state.screener.arch().to_string(),
        model_checksum: state.screener.checksum_hex(),
        uptime_seconds: state.started.elapsed().as_secs_f64(),
    })
}

fn multipart_error(e: axum::extract::multipart::MultipartError) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::new(ErrorCode::PayloadTooLarge, "upload exceeds the size limit")
    } else {
        ApiError::new(ErrorCode::MalformedMultipart, e.body_text())
    }
}

async fn predict(State(state): State<Arc<AppState>>, req: Request) -> Result<Json<PredictResponse>, ApiError> {
    let content_type = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    if !content_type.to_ascii_lowercase().starts_with("multipart/form-data") {
        return Err(ApiError::new(
            ErrorCode::UnsupportedMediaType,
            "expected multipart/form-data with an `image` field",
        ));
    }
    let mut multipart = Multipart::from_request(req, &state)
        .await
        .map_err(|e| ApiError::new(ErrorCode::MalformedMultipart, e.body_text()))?;
    let mut image = None;
    while let Some(field) = multipart.next_field().await.map_err(multipart_error)? {
        if field.name() == Some("image") {
            image = Some(field.bytes().await.map_err(multipart_error)?);
            break;
        }
    }
    let bytes = image.ok_or_else(|| ApiError::new(ErrorCode::MissingField, "no `image` field in the form"))?;

    let worker = state.clone();
    let job = tokio::task::spawn_blocking(move || worker.screener.screen_bytes(&bytes));
    let prediction = match tokio::time::timeout(state.request_timeout, job).await {
        Err(_) => return Err(ApiError::new(ErrorCode::Timeout, "scoring took too long")),
        Ok(Err(join)) => return Err(ApiError::internal(join)),
        Ok(Ok(result)) => result?,
    };
    Ok(Json(PredictResponse {
        probability_patient: prediction.p_patient,
        label: prediction.label.to_string(),
        model_arch: state.screener.arch().to_string(),
        model_checksum: state.screener.checksum_hex(),
        preprocess_echo: state.screener.preprocess_config().into(),
    }))
}

async fn not_found() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(ErrorCode::MethodNotAllowed, "method not allowed on this endpoint")
}

fn cors_layer(origin: Option<&str>) -> Result<CorsLayer, ServiceError> {
    let allow = match origin {
        None | Some("*") => AllowOrigin::from(Any),
        Some(o) => AllowOrigin::exact(HeaderValue::from_str(o).map_err(|_| ServiceError::BadOrigin(o.to_string()))?),
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any))
}

pub fn router(state: Arc<AppState>, max_upload_bytes: usize, cors_origin: Option<&str>) -> Result<Router, ServiceError> {
    if max_upload_bytes == 0 {
        return Err(ServiceError::BadConfig);
    }
    Ok(Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/predict", post(predict))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(max_upload_bytes))
        .layer(cors_layer(cors_origin)?)
        .with_state(state))
}

/// A started server. Dropping it does not stop the server; call
/// [`Running::shutdown`].
pub struct Running {
    pub addr: SocketAddr,
    stop: tokio::sync::oneshot::Sender<()>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl Running {
    /// Stops accepting, waits for in-flight requests, then returns.
    pub async fn shutdown(self) -> std::io::Result<()> {
        let _ = self.stop.send(());
        self.task.await.map_err(std::io::Error::other)?
    }
}

/// Loads the model, then binds; a bad model never opens a socket.
pub async fn start(cfg: &ServiceConfig) -> Result<Running, ServiceError> {
    let (router, listener) = prepare(cfg).await?;
    let addr = listener.local_addr()?;
    let (stop, rx) = tokio::sync::oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(Running { addr, stop, task })
}

async fn prepare(cfg: &ServiceConfig) -> Result<(Router, TcpListener), ServiceError> {
    let preprocess = cfg.preprocess_config.as_ref().map(PreprocessConfig::load).transpose()?;
    let screener = Screener::load(&cfg.model_path, preprocess)?;
    log::info!("loaded {} model, checksum {}", screener.arch(), screener.checksum_hex());
    let state = Arc::new(AppState::new(screener, cfg.request_timeout));
    let router = router(state, cfg.max_upload_bytes, cfg.cors_origin.as_deref())?;
    let listener = TcpListener::bind(cfg.bind)
        .await
        .map_err(|source| ServiceError::BindFailure { addr: cfg.bind, source })?;
    Ok((router, listener))
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
/// `on_bound` sees the actual address, useful with port 0.
pub async fn serve(
    cfg: &ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
    on_bound: impl FnOnce(SocketAddr),
) -> Result<(), ServiceError> {
    let (router, listener) = prepare(cfg).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await?;
    Ok(())
}
