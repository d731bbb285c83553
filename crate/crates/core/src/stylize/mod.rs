//! Depth estimation, depth+prompt conditioned generation with horizontal
//! wrap continuity, and upscaling. Every model sits behind a backend trait;
//! the orchestration here owns normalization, validation and provenance.

mod http;
mod mock;
mod pipeline;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoCoordinate;

pub use http::HttpModelServer;
pub use mock::{MockDepth, MockGenerator, MockUpscaler};
pub use pipeline::{
    append_manifest, manifest_digest, parse_manifest, read_manifest, run_batch, run_pipeline, Backends, ManifestEntry, PipelineJob,
    StageStatus, MANIFEST_FILE,
};

pub const DEFAULT_STEPS: u32 = 30;
pub const DEFAULT_SEAM_TOLERANCE: f64 = 2.0 / 255.0;
pub const DEFAULT_UPSCALE: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Panorama,
    Depth,
    Generate,
    Upscale,
    Record,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Panorama => "panorama",
            Stage::Depth => "depth",
            Stage::Generate => "generate",
            Stage::Upscale => "upscale",
            Stage::Record => "record",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum StylizeError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("seam discontinuity {found:.5} exceeds tolerance {tolerance:.5}")]
    SeamViolation { found: f64, tolerance: f64 },
    #[error("backend returned {found:?}, expected {expected:?}")]
    DimMismatch { expected: (u32, u32), found: (u32, u32) },
    #[error("invalid depth map: {0}")]
    InvalidDepth(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("[{stage}] {artwork_id}: {source}")]
    Stage {
        stage: Stage,
        artwork_id: String,
        #[source]
        source: Box<StylizeError>,
    },
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl StylizeError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            StylizeError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

/// Relative depth in `[0, 1]`, stored as 16-bit levels so a map read back
/// from disk is bit-identical to the one that was written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    levels: Vec<u16>,
}

impl DepthMap {
    /// Max-normalize raw non-negative values. An all-zero map stays zero.
    pub fn normalize(width: u32, height: u32, raw: &[f32]) -> Result<Self, StylizeError> {
        if width == 0 || height == 0 {
            return Err(StylizeError::InvalidDepth("empty raster".into()));
        }
        if raw.len() != (width as usize) * (height as usize) {
            return Err(StylizeError::InvalidDepth(format!("{} values for {width}x{height}", raw.len())));
        }
        if let Some(v) = raw.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(StylizeError::InvalidDepth(format!("value {v} is not finite and non-negative")));
        }
        let max = raw.iter().copied().fold(0.0f32, f32::max);
        let levels = raw.iter().map(|&v| if max > 0.0 { (f64::from(v) / f64::from(max) * 65535.0).round() as u16 } else { 0 }).collect();
        Ok(Self { width, height, levels })
    }

    pub fn from_levels(width: u32, height: u32, levels: Vec<u16>) -> Result<Self, StylizeError> {
        if width == 0 || height == 0 || levels.len() != (width as usize) * (height as usize) {
            return Err(StylizeError::InvalidDepth("level buffer does not match dimensions".into()));
        }
        Ok(Self { width, height, levels })
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn levels(&self) -> &[u16] {
        &self.levels
    }

    pub fn level(&self, x: u32, y: u32) -> u16 {
        self.levels[(y * self.width + x) as usize]
    }

    pub fn value(&self, x: u32, y: u32) -> f32 {
        f32::from(self.level(x, y)) / 65535.0
    }

    pub fn values(&self) -> Vec<f32> {
        self.levels.iter().map(|&l| f32::from(l) / 65535.0).collect()
    }

    pub fn to_png(&self) -> Vec<u8> {
        crate::raster::encode_png_gray16(self.width, self.height, &self.levels)
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self, StylizeError> {
        let img = crate::raster::decode_gray16(bytes)?;
        let (w, h) = img.dimensions();
        Self::from_levels(w, h, img.into_raw())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub prompt: String,
    pub depth: DepthMap,
    pub seed: u64,
    pub steps: u32,
    pub tiling: bool,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>, depth: DepthMap, seed: u64) -> Self {
        Self { prompt: prompt.into(), depth, seed, steps: DEFAULT_STEPS, tiling: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub artwork_id: String,
    pub coordinate: GeoCoordinate,
    pub backend: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtPanorama {
    pub pixels: RgbImage,
    pub provenance: Provenance,
    pub upscaled: bool,
}

pub trait DepthBackend: Send + Sync {
    fn id(&self) -> &str;
    /// Row-major raw depth, one value per pixel; any non-negative scale.
    fn depth(&self, image: &RgbImage) -> Result<Vec<f32>, StylizeError>;
}

pub trait GenerationBackend: Send + Sync {
    fn id(&self) -> &str;
    fn generate(&self, req: &GenerationRequest) -> Result<RgbImage, StylizeError>;
}

pub trait UpscaleBackend: Send + Sync {
    fn id(&self) -> &str;
    fn upscale(&self, image: &RgbImage, factor: u32) -> Result<RgbImage, StylizeError>;
}

pub fn estimate_depth(image: &RgbImage, backend: &dyn DepthBackend) -> Result<DepthMap, StylizeError> {
    let (w, h) = image.dimensions();
    let raw = backend.depth(image)?;
    DepthMap::normalize(w, h, &raw)
}

/// Mean absolute per-channel difference between the first and last
/// columns, in `[0, 1]`.
pub fn seam_discontinuity(img: &RgbImage) -> f64 {
    let (w, h) = img.dimensions();
    assert!(w >= 2 && h >= 1, "seam needs at least two columns");
    let mut sum = 0u64;
    for y in 0..h {
        let (a, b) = (img.get_pixel(0, y), img.get_pixel(w - 1, y));
        for c in 0..3 {
            sum += u64::from(a[c].abs_diff(b[c]));
        }
    }
    sum as f64 / (255.0 * 3.0 * f64::from(h))
}

pub fn generate_art_panorama(
    req: &GenerationRequest,
    artwork_id: &str,
    coordinate: GeoCoordinate,
    backend: &dyn GenerationBackend,
    seam_tolerance: f64,
) -> Result<ArtPanorama, StylizeError> {
    if req.prompt.trim().is_empty() {
        return Err(StylizeError::InvalidRequest("empty prompt".into()));
    }
    if req.steps == 0 {
        return Err(StylizeError::InvalidRequest("steps must be at least 1".into()));
    }
    let pixels = backend.generate(req)?;
    if pixels.dimensions() != req.depth.dimensions() {
        return Err(StylizeError::DimMismatch { expected: req.depth.dimensions(), found: pixels.dimensions() });
    }
    if req.tiling && pixels.width() >= 2 {
        let found = seam_discontinuity(&pixels);
        if found > seam_tolerance {
            return Err(StylizeError::SeamViolation { found, tolerance: seam_tolerance });
        }
    }
    let provenance = Provenance { artwork_id: artwork_id.to_owned(), coordinate, backend: backend.id().to_owned(), seed: req.seed };
    Ok(ArtPanorama { pixels, provenance, upscaled: false })
}

pub fn upscale(img: &RgbImage, factor: u32, backend: &dyn UpscaleBackend) -> Result<RgbImage, StylizeError> {
    if factor == 0 {
        return Err(StylizeError::InvalidRequest("upscale factor must be at least 1".into()));
    }
    let out = backend.upscale(img, factor)?;
    let expected = (img.width() * factor, img.height() * factor);
    if out.dimensions() != expected {
        return Err(StylizeError::DimMismatch { expected, found: out.dimensions() });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylizeOptions {
    pub steps: u32,
    pub tiling: bool,
    pub seam_tolerance: f64,
    pub upscale_factor: u32,
}

impl Default for StylizeOptions {
    fn default() -> Self {
        Self { steps: DEFAULT_STEPS, tiling: true, seam_tolerance: DEFAULT_SEAM_TOLERANCE, upscale_factor: DEFAULT_UPSCALE }
    }
}
