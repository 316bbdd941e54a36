use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::CONTENT_TYPE;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::{
    WireGenRequest, WireGenResponse, WireKeywordRequest, WireKeywordResponse, WireSegmentRequest,
    WireSegmentResponse, GENERATE_PATH, KEYWORDS_PATH, SEGMENT_PATH,
};
use super::{BackendDescriptor, GenBackend, GenError, GenRequest, GenResult, Permits};
use crate::attention::{AttentionError, SegmentationProvider};
use crate::raster::RasterImage;
use crate::semantics::{Keyword, KeywordProvider, SemanticsError};

/// Blocking JSON client shared by the generation, keyword and segmentation
/// endpoints of one service.
#[derive(Debug)]
struct JsonClient {
    descriptor: BackendDescriptor,
    client: Client,
    permits: Permits,
}

impl JsonClient {
    fn new(descriptor: BackendDescriptor) -> Result<Self, GenError> {
        let client = Client::builder()
            .timeout(Duration::from_millis(descriptor.timeout_ms))
            .connect_timeout(Duration::from_millis(descriptor.timeout_ms))
            .build()
            .map_err(|e| GenError::BackendUnreachable {
                endpoint: descriptor.endpoint.clone(),
                message: e.to_string(),
            })?;
        Ok(JsonClient {
            permits: Permits::new(descriptor.max_concurrent),
            descriptor,
            client,
        })
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, GenError> {
        let url = format!("{}{path}", self.descriptor.endpoint);
        let body = serde_json::to_vec(body).map_err(|e| GenError::Protocol(e.to_string()))?;
        let _permit = self.permits.acquire();
        let map_err = |e: reqwest::Error| {
            if e.is_timeout() {
                GenError::BackendTimeout {
                    timeout_ms: self.descriptor.timeout_ms,
                }
            } else {
                GenError::BackendUnreachable {
                    endpoint: url.clone(),
                    message: e.to_string(),
                }
            }
        };
        let response = self
            .client
            .post(&url)
            .header(CONTENT_TYPE, "application/json")
            .body(body)
            .send()
            .map_err(map_err)?;
        let status = response.status();
        let bytes = response.bytes().map_err(map_err)?;
        if !status.is_success() {
            return Err(GenError::Protocol(format!(
                "{url} answered {status}: {}",
                String::from_utf8_lossy(&bytes)
            )));
        }
        serde_json::from_slice(&bytes).map_err(|e| GenError::Protocol(format!("{url}: {e}")))
    }
}

/// Backend reached over HTTP at `{endpoint}/generate`.
#[derive(Debug)]
pub struct HttpBackend {
    inner: JsonClient,
}

impl HttpBackend {
    pub fn new(descriptor: BackendDescriptor) -> Result<Self, GenError> {
        Ok(HttpBackend {
            inner: JsonClient::new(descriptor)?,
        })
    }
}

impl GenBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.inner.descriptor.endpoint
    }

    fn render(&self, request: &GenRequest) -> Result<GenResult, GenError> {
        let wire = WireGenRequest::from_request(request)?;
        let response: WireGenResponse = self.inner.post(GENERATE_PATH, &wire)?;
        response.into_result()
    }
}

/// Keyword provider at `{endpoint}/keywords`.
#[derive(Debug)]
pub struct HttpKeywordProvider {
    inner: JsonClient,
}

impl HttpKeywordProvider {
    pub fn new(descriptor: BackendDescriptor) -> Result<Self, GenError> {
        Ok(HttpKeywordProvider {
            inner: JsonClient::new(descriptor)?,
        })
    }
}

impl KeywordProvider for HttpKeywordProvider {
    fn score_terms(&self, text: &str) -> Result<Vec<Keyword>, SemanticsError> {
        let response: WireKeywordResponse = self
            .inner
            .post(KEYWORDS_PATH, &WireKeywordRequest { text: text.to_string() })
            .map_err(|e| SemanticsError::ProviderUnavailable(e.to_string()))?;
        Ok(response.keywords)
    }
}

/// Segmentation provider at `{endpoint}/segment`.
#[derive(Debug)]
pub struct HttpSegmentation {
    inner: JsonClient,
}

impl HttpSegmentation {
    pub fn new(descriptor: BackendDescriptor) -> Result<Self, GenError> {
        Ok(HttpSegmentation {
            inner: JsonClient::new(descriptor)?,
        })
    }
}

impl SegmentationProvider for HttpSegmentation {
    fn alpha_matte(&self, image: &RasterImage) -> Result<Vec<u8>, AttentionError> {
        let unavailable = |e: String| AttentionError::ProviderUnavailable(e);
        let request = WireSegmentRequest {
            image: image.to_png_base64().map_err(|e| unavailable(e.to_string()))?,
        };
        let response: WireSegmentResponse = self
            .inner
            .post(SEGMENT_PATH, &request)
            .map_err(|e| unavailable(e.to_string()))?;
        let matte = RasterImage::from_png_base64(&response.matte).map_err(|e| unavailable(e.to_string()))?;
        if matte.dims() != image.dims() {
            return Err(AttentionError::DimensionMismatch(format!(
                "matte is {:?}, image is {:?}",
                matte.dims(),
                image.dims()
            )));
        }
        Ok(matte.pixels().map(|p| p[3]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refused_connection_is_unreachable() {
        let mut d = BackendDescriptor::http("http://127.0.0.1:9");
        d.timeout_ms = 2_000;
        let backend = HttpBackend::new(d).unwrap();
        let req = GenRequest::txt2img("sun", "", 1, (32, 32));
        let start = std::time::Instant::now();
        let err = backend.render(&req).unwrap_err();
        assert!(matches!(err, GenError::BackendUnreachable { .. } | GenError::BackendTimeout { .. }), "{err:?}");
        assert!(start.elapsed() < Duration::from_millis(2_500));
    }
}
