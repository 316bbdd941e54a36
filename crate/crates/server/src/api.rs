//! HTTP surface. Handlers move every pipeline call onto the blocking pool:
//! the core library and its HTTP backend client are synchronous.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post, put};
use axum::{Json, Router};
use chartforge::attention::{LargestComponent, SegmentationProvider};
use chartforge::genclient::wire::{
    WireGenRequest, WireGenResponse, WireKeywordRequest, WireKeywordResponse, WireSegmentRequest,
    WireSegmentResponse, GENERATE_PATH, KEYWORDS_PATH, SEGMENT_PATH,
};
use chartforge::genclient::{generate, MockBackend};
use chartforge::raster::RasterImage;
use chartforge::semantics::{KeywordProvider, RarityKeywords};
use serde::{Deserialize, Serialize};

use crate::error::{ErrorClass, ServiceError};
use crate::model::{GenOptions, LayerStack, LayeredDocument};
use crate::service::{
    CreateProject, EvaluateRequest, Export, ExportRequest, RefineRequest, ReplicateRequest, Service,
};

pub const PORT_VAR: &str = "CHARTFORGE_PORT";
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0.class() {
            ErrorClass::NotFound => StatusCode::NOT_FOUND,
            ErrorClass::Invalid => StatusCode::BAD_REQUEST,
            ErrorClass::Unprocessable => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorClass::Upstream => StatusCode::BAD_GATEWAY,
            ErrorClass::UpstreamTimeout => StatusCode::GATEWAY_TIMEOUT,
            ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::warn!(error = %self.0, "request failed");
        }
        let body = ErrorBody {
            error: self.0.code().to_string(),
            message: self.0.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(ServiceError::Storage(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

/// Body of `POST /projects`: a data upload or a layered export to import.
#[derive(Deserialize)]
#[serde(untagged)]
enum CreateBody {
    Import { layered: Box<LayeredDocument> },
    Upload(CreateProject),
}

#[derive(Deserialize)]
struct KeptBody {
    kept: bool,
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/projects", post(create_project))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/semantics", get(get_semantics))
        .route("/projects/{id}/generate", post(post_generate))
        .route("/projects/{id}/replicate", post(post_replicate))
        .route("/projects/{id}/refine", post(post_refine))
        .route("/projects/{id}/evaluate", post(post_evaluate))
        .route("/projects/{id}/export", post(post_export))
        .route("/projects/{id}/layers", put(put_layers))
        .route("/projects/{id}/gallery/{entry}", patch(patch_gallery))
        .route("/assets/{id}", get(get_asset))
        .with_state(service)
}

async fn create_project(State(svc): State<Arc<Service>>, Json(body): Json<CreateBody>) -> ApiResult<Response> {
    let project = blocking(move || match body {
        CreateBody::Import { layered } => svc.import_layered(*layered),
        CreateBody::Upload(req) => svc.create_project(req),
    })
    .await?;
    Ok((StatusCode::CREATED, Json(project)).into_response())
}

async fn get_project(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || svc.project(&id)).await?).into_response())
}

async fn get_semantics(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || svc.semantics(&id)).await?).into_response())
}

async fn post_generate(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(options): Json<GenOptions>,
) -> ApiResult<Response> {
    let entry = blocking(move || svc.generate(&id, options)).await?;
    Ok((StatusCode::CREATED, Json(entry)).into_response())
}

async fn post_replicate(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(req): Json<ReplicateRequest>,
) -> ApiResult<Response> {
    Ok(Json(blocking(move || svc.replicate(&id, req)).await?).into_response())
}

async fn post_refine(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(req): Json<RefineRequest>,
) -> ApiResult<Response> {
    Ok(Json(blocking(move || svc.refine(&id, req)).await?).into_response())
}

async fn post_evaluate(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(req): Json<EvaluateRequest>,
) -> ApiResult<Response> {
    Ok(Json(blocking(move || svc.evaluate(&id, req)).await?).into_response())
}

async fn post_export(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(req): Json<ExportRequest>,
) -> ApiResult<Response> {
    match blocking(move || svc.export(&id, &req.format)).await? {
        Export::Png(bytes) => Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response()),
        Export::Layered(doc) => Ok(Json(doc).into_response()),
    }
}

async fn put_layers(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(stack): Json<LayerStack>,
) -> ApiResult<Response> {
    Ok(Json(blocking(move || svc.set_layers(&id, stack)).await?).into_response())
}

async fn patch_gallery(
    State(svc): State<Arc<Service>>,
    Path((id, entry)): Path<(String, String)>,
    Json(body): Json<KeptBody>,
) -> ApiResult<Response> {
    Ok(Json(blocking(move || svc.set_kept(&id, &entry, body.kept)).await?).into_response())
}

async fn get_asset(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let (bytes, kind) = blocking(move || svc.asset(&id)).await?;
    Ok((
        [
            (header::CONTENT_TYPE, kind.content_type()),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable"),
        ],
        bytes,
    )
        .into_response())
}

/// Reference implementation of the backend wire protocol, answering with
/// the mock renderer, rarity keywords and largest-component mattes.
pub fn mock_backend_router() -> Router {
    Router::new()
        .route(GENERATE_PATH, post(mock_generate))
        .route(KEYWORDS_PATH, post(mock_keywords))
        .route(SEGMENT_PATH, post(mock_segment))
}

fn bad_request(message: String) -> Response {
    let body = ErrorBody {
        error: "bad_request".into(),
        message,
    };
    (StatusCode::BAD_REQUEST, Json(body)).into_response()
}

async fn mock_generate(Json(req): Json<WireGenRequest>) -> Response {
    let result = tokio::task::spawn_blocking(move || {
        let request = req.into_request()?;
        let result = generate(&request, &MockBackend::default())?;
        WireGenResponse::from_result(&result)
    })
    .await;
    match result {
        Ok(Ok(body)) => Json(body).into_response(),
        Ok(Err(e)) => bad_request(e.to_string()),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn mock_keywords(Json(req): Json<WireKeywordRequest>) -> Response {
    match RarityKeywords::default().score_terms(&req.text) {
        Ok(keywords) => Json(WireKeywordResponse { keywords }).into_response(),
        Err(e) => bad_request(e.to_string()),
    }
}

async fn mock_segment(Json(req): Json<WireSegmentRequest>) -> Response {
    let result = tokio::task::spawn_blocking(move || -> Result<WireSegmentResponse, String> {
        let image = RasterImage::from_png_base64(&req.image).map_err(|e| e.to_string())?;
        let matte = LargestComponent.alpha_matte(&image).map_err(|e| e.to_string())?;
        let mut out = RasterImage::filled(image.width(), image.height(), [0, 0, 0, 0]);
        for (i, a) in matte.into_iter().enumerate() {
            let (x, y) = (i as u32 % image.width(), i as u32 / image.width());
            out.set_pixel(x, y, [a, a, a, a]);
        }
        Ok(WireSegmentResponse {
            matte: out.to_png_base64().map_err(|e| e.to_string())?,
        })
    })
    .await;
    match result {
        Ok(Ok(body)) => Json(body).into_response(),
        Ok(Err(message)) => bad_request(message),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

/// Serves `app` until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
