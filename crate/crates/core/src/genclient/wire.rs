//! JSON bodies exchanged with an external backend.
//!
//! Images travel as base64 PNG strings; attention grids as row-major value
//! arrays with their side length declared.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GenError, GenMode, GenRequest, GenResult};
use crate::attention::AttentionGrid;
use crate::raster::RasterImage;
use crate::semantics::Keyword;

pub const GENERATE_PATH: &str = "/generate";
pub const KEYWORDS_PATH: &str = "/keywords";
pub const SEGMENT_PATH: &str = "/segment";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireGenRequest {
    pub prompt: String,
    pub prompt_object: String,
    pub prompt_description: String,
    pub mode: GenMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireAttention {
    pub token: String,
    pub n: u32,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireGenResponse {
    pub image: String,
    pub attention: Vec<WireAttention>,
    pub backend_id: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireKeywordRequest {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireKeywordResponse {
    pub keywords: Vec<Keyword>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireSegmentRequest {
    pub image: String,
}

/// The matte is a PNG whose alpha channel carries the matte values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireSegmentResponse {
    pub matte: String,
}

fn protocol<E: std::fmt::Display>(e: E) -> GenError {
    GenError::Protocol(e.to_string())
}

impl WireGenRequest {
    pub fn from_request(request: &GenRequest) -> Result<Self, GenError> {
        Ok(WireGenRequest {
            prompt: request.prompt(),
            prompt_object: request.prompt_object.clone(),
            prompt_description: request.prompt_description.clone(),
            mode: request.mode,
            init_image: request
                .init_image
                .as_ref()
                .map(|i| i.to_png_base64().map_err(protocol))
                .transpose()?,
            strength: request.strength,
            seed: request.seed,
            width: request.size.0,
            height: request.size.1,
        })
    }

    pub fn into_request(self) -> Result<GenRequest, GenError> {
        Ok(GenRequest {
            prompt_object: self.prompt_object,
            prompt_description: self.prompt_description,
            mode: self.mode,
            init_image: self
                .init_image
                .map(|t| RasterImage::from_png_base64(&t).map_err(protocol))
                .transpose()?,
            strength: self.strength,
            seed: self.seed,
            size: (self.width, self.height),
        })
    }
}

impl WireGenResponse {
    pub fn from_result(result: &GenResult) -> Result<Self, GenError> {
        Ok(WireGenResponse {
            image: result.image.to_png_base64().map_err(protocol)?,
            attention: result
                .attention
                .iter()
                .map(|(token, g)| WireAttention {
                    token: token.clone(),
                    n: g.side(),
                    values: g.values().values().to_vec(),
                })
                .collect(),
            backend_id: result.backend_id.clone(),
            seed: result.seed,
        })
    }

    pub fn into_result(self) -> Result<GenResult, GenError> {
        let mut attention = BTreeMap::new();
        for a in self.attention {
            let grid = AttentionGrid::new(a.token.clone(), a.n, a.values).map_err(protocol)?;
            attention.insert(a.token, grid);
        }
        Ok(GenResult {
            image: RasterImage::from_png_base64(&self.image).map_err(protocol)?,
            attention,
            backend_id: self.backend_id,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genclient::mock_render;

    #[test]
    fn result_round_trips_through_json() {
        let req = GenRequest::txt2img("kite", "red kite", 4, (64, 64));
        let res = mock_render(&req);
        let text = serde_json::to_string(&WireGenResponse::from_result(&res).unwrap()).unwrap();
        let back: WireGenResponse = serde_json::from_str(&text).unwrap();
        assert_eq!(back.attention.iter().find(|a| a.token == "kite").unwrap().values.len(), 256);
        assert_eq!(back.into_result().unwrap(), res);
    }

    #[test]
    fn request_round_trips() {
        let init = RasterImage::filled(16, 16, [1, 2, 3, 4]);
        let req = GenRequest::img2img("kite", "", init, 0.25, 2);
        let wire = WireGenRequest::from_request(&req).unwrap();
        assert_eq!(wire.mode, GenMode::Img2Img);
        let text = serde_json::to_string(&wire).unwrap();
        assert!(text.contains("\"img2img\""));
        let back: WireGenRequest = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_request().unwrap(), req);
    }
}
