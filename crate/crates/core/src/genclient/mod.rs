//! Text-to-image backend orchestration.
//!
//! A [`GenBackend`] turns a [`GenRequest`] into an image plus per-token
//! attention grids. Two implementations share the contract: the
//! deterministic [`MockBackend`] and [`HttpBackend`], which speaks the JSON
//! wire protocol in [`wire`]. [`generate`] validates both sides of a call so
//! every result reaching the pipeline passes the same checks.

mod http;
mod mock;
pub mod wire;

use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{AttentionGrid, FusedConditionImage, GRID_SIDE};
use crate::raster::RasterImage;

pub use http::{HttpBackend, HttpKeywordProvider, HttpSegmentation};
pub use mock::{mock_render, MockBackend, MockScene};

/// Environment variable naming the backend base URL; unset selects the mock.
pub const BACKEND_URL_VAR: &str = "CHARTFORGE_BACKEND_URL";
pub const DEFAULT_TIMEOUT_MS: u64 = 120_000;
pub const DEFAULT_MAX_CONCURRENT: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("backend unreachable at {endpoint}: {message}")]
    BackendUnreachable { endpoint: String, message: String },
    #[error("backend did not answer within {timeout_ms} ms")]
    BackendTimeout { timeout_ms: u64 },
    #[error("backend returned no attention grid for token {token:?}")]
    MissingAttention { token: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend response: {0}")]
    Protocol(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenMode {
    Txt2Img,
    Img2Img,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub prompt_object: String,
    pub prompt_description: String,
    pub mode: GenMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_image: Option<RasterImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    pub seed: u64,
    pub size: (u32, u32),
}

impl GenRequest {
    pub fn txt2img(object: &str, description: &str, seed: u64, size: (u32, u32)) -> Self {
        GenRequest {
            prompt_object: object.to_string(),
            prompt_description: description.to_string(),
            mode: GenMode::Txt2Img,
            init_image: None,
            strength: None,
            seed,
            size,
        }
    }

    pub fn img2img(object: &str, description: &str, init: RasterImage, strength: f64, seed: u64) -> Self {
        GenRequest {
            prompt_object: object.to_string(),
            prompt_description: description.to_string(),
            mode: GenMode::Img2Img,
            size: init.dims(),
            init_image: Some(init),
            strength: Some(strength),
            seed,
        }
    }

    /// Image-to-image request initialised from a fused condition image.
    pub fn from_condition(object: &str, description: &str, cond: &FusedConditionImage, strength: f64, seed: u64) -> Self {
        GenRequest::img2img(object, description, cond.to_raster(), strength, seed)
    }

    /// The full prompt, object first.
    pub fn prompt(&self) -> String {
        let object = self.prompt_object.trim();
        let description = self.prompt_description.trim();
        if description.is_empty() {
            object.to_string()
        } else {
            format!("{object}, {description}")
        }
    }

    /// Key under which the object's attention grid is expected.
    pub fn object_token(&self) -> String {
        object_token(&self.prompt_object)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidRequest(m));
        if self.object_token().is_empty() {
            return bad("prompt object must not be empty".into());
        }
        let (w, h) = self.size;
        if w == 0 || h == 0 {
            return bad(format!("size {w}x{h} must be positive"));
        }
        match self.mode {
            GenMode::Txt2Img => {
                if self.init_image.is_some() || self.strength.is_some() {
                    return bad("txt2img takes neither an init image nor a strength".into());
                }
            }
            GenMode::Img2Img => {
                let Some(init) = &self.init_image else {
                    return bad("img2img requires an init image".into());
                };
                if init.dims() != self.size {
                    return bad(format!("init image is {:?}, requested size {:?}", init.dims(), self.size));
                }
                match self.strength {
                    Some(s) if (0.0..=1.0).contains(&s) => {}
                    other => return bad(format!("img2img strength {other:?} must be in [0, 1]")),
                }
            }
        }
        Ok(())
    }
}

/// Lower-cased, trimmed object phrase.
pub fn object_token(object: &str) -> String {
    object.trim().to_lowercase()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenResult {
    pub image: RasterImage,
    pub attention: BTreeMap<String, AttentionGrid>,
    pub backend_id: String,
    pub seed: u64,
}

impl GenResult {
    pub fn object_attention(&self, request: &GenRequest) -> Result<&AttentionGrid, GenError> {
        let token = request.object_token();
        self.attention
            .get(&token)
            .ok_or(GenError::MissingAttention { token })
    }
}

/// Checks a result against the request it answers: image size, presence of
/// the object grid, and grid shape.
pub fn validate_result(request: &GenRequest, result: &GenResult) -> Result<(), GenError> {
    if result.image.dims() != request.size {
        return Err(GenError::Protocol(format!(
            "image is {:?}, requested {:?}",
            result.image.dims(),
            request.size
        )));
    }
    let grid = result.object_attention(request)?;
    if grid.side() != GRID_SIDE {
        return Err(GenError::Protocol(format!(
            "attention grid side {} (expected {GRID_SIDE})",
            grid.side()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    /// Base URL, or `mock` for the built-in backend.
    pub endpoint: String,
    pub timeout_ms: u64,
    pub max_concurrent: usize,
}

impl BackendDescriptor {
    pub fn mock() -> Self {
        BackendDescriptor {
            endpoint: "mock".into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_concurrent: DEFAULT_MAX_CONCURRENT,
        }
    }

    pub fn http(endpoint: &str) -> Self {
        BackendDescriptor {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            ..BackendDescriptor::mock()
        }
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint == "mock"
    }

    /// From `CHARTFORGE_BACKEND_URL`; mock when unset or empty.
    pub fn from_env() -> Self {
        match std::env::var(BACKEND_URL_VAR) {
            Ok(url) if !url.trim().is_empty() => BackendDescriptor::http(url.trim()),
            _ => BackendDescriptor::mock(),
        }
    }
}

pub trait GenBackend: Send + Sync {
    fn id(&self) -> &str;
    fn render(&self, request: &GenRequest) -> Result<GenResult, GenError>;
}

/// Builds the backend a descriptor names.
pub fn connect(descriptor: &BackendDescriptor) -> Result<Arc<dyn GenBackend>, GenError> {
    if descriptor.max_concurrent == 0 {
        return Err(GenError::InvalidRequest("max_concurrent must be at least 1".into()));
    }
    if descriptor.is_mock() {
        Ok(Arc::new(MockBackend::new(descriptor.max_concurrent)))
    } else {
        Ok(Arc::new(HttpBackend::new(descriptor.clone())?))
    }
}

/// Validates the request, calls the backend and validates the result.
pub fn generate(request: &GenRequest, backend: &dyn GenBackend) -> Result<GenResult, GenError> {
    request.validate()?;
    let result = backend.render(request)?;
    validate_result(request, &result)?;
    Ok(result)
}

/// Counting semaphore bounding in-flight backend calls.
#[derive(Debug)]
pub(crate) struct Permits {
    available: Mutex<usize>,
    freed: Condvar,
}

pub(crate) struct Permit<'a>(&'a Permits);

impl Permits {
    pub(crate) fn new(n: usize) -> Self {
        Permits {
            available: Mutex::new(n.max(1)),
            freed: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.available.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.0.freed.notify_one();
    }
}
