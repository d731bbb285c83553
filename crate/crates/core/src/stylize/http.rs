//! Adapter for a model server exposing the three backend contracts over
//! HTTP. Images travel as PNG request/response bodies; scalar arguments go
//! in the query string.
//!
//! - `POST {base}/depth` -> 16-bit grayscale PNG
//! - `POST {base}/generate?prompt=&seed=&steps=&tiling=` (body: depth PNG) -> RGB PNG
//! - `POST {base}/upscale?factor=` -> RGB PNG

use std::time::Duration;

use image::RgbImage;

use super::{DepthBackend, GenerationBackend, GenerationRequest, StylizeError, UpscaleBackend};
use crate::raster::{decode_gray16, decode_rgb, encode_png};

pub struct HttpModelServer {
    base: String,
    client: reqwest::blocking::Client,
}

impl HttpModelServer {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, StylizeError> {
        let client =
            reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| StylizeError::BackendUnavailable(e.to_string()))?;
        Ok(Self { base: base_url.trim_end_matches('/').to_owned(), client })
    }

    fn post(&self, path: &str, query: &[(&str, String)], body: Vec<u8>) -> Result<Vec<u8>, StylizeError> {
        let unavailable = |e: reqwest::Error| StylizeError::BackendUnavailable(e.to_string());
        let resp = self
            .client
            .post(format!("{}/{path}", self.base))
            .query(query)
            .header("content-type", "image/png")
            .body(body)
            .send()
            .map_err(unavailable)?
            .error_for_status()
            .map_err(unavailable)?;
        Ok(resp.bytes().map_err(unavailable)?.to_vec())
    }
}

impl DepthBackend for HttpModelServer {
    fn id(&self) -> &str {
        "http-depth"
    }

    fn depth(&self, image: &RgbImage) -> Result<Vec<f32>, StylizeError> {
        let bytes = self.post("depth", &[], encode_png(image))?;
        let map = decode_gray16(&bytes)?;
        if map.dimensions() != image.dimensions() {
            return Err(StylizeError::DimMismatch { expected: image.dimensions(), found: map.dimensions() });
        }
        Ok(map.into_raw().into_iter().map(f32::from).collect())
    }
}

impl GenerationBackend for HttpModelServer {
    fn id(&self) -> &str {
        "http-generate"
    }

    fn generate(&self, req: &GenerationRequest) -> Result<RgbImage, StylizeError> {
        let query = [
            ("prompt", req.prompt.clone()),
            ("seed", req.seed.to_string()),
            ("steps", req.steps.to_string()),
            ("tiling", req.tiling.to_string()),
        ];
        Ok(decode_rgb(&self.post("generate", &query, req.depth.to_png())?)?)
    }
}

impl UpscaleBackend for HttpModelServer {
    fn id(&self) -> &str {
        "http-upscale"
    }

    fn upscale(&self, image: &RgbImage, factor: u32) -> Result<RgbImage, StylizeError> {
        Ok(decode_rgb(&self.post("upscale", &[("factor", factor.to_string())], encode_png(image))?)?)
    }
}
