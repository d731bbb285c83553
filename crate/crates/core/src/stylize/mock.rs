//! Deterministic stand-ins for the depth, generation and upscale models.
//! All arithmetic is integer so outputs are bit-identical across machines.

use std::sync::atomic::{AtomicUsize, Ordering};

use image::{Rgb, RgbImage};
use sha2::{Digest, Sha256};

use super::{DepthBackend, GenerationBackend, GenerationRequest, StylizeError, UpscaleBackend};
use crate::raster::resize_bilinear;

fn luma(p: &Rgb<u8>) -> u32 {
    (299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2]) + 500) / 1000
}

/// Inverse luminance: darker pixels are treated as farther away.
#[derive(Debug, Default)]
pub struct MockDepth {
    calls: AtomicUsize,
}

impl MockDepth {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl DepthBackend for MockDepth {
    fn id(&self) -> &str {
        "mock-depth"
    }

    fn depth(&self, image: &RgbImage) -> Result<Vec<f32>, StylizeError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(image.pixels().map(|p| (256 - luma(p)) as f32 / 256.0).collect())
    }
}

/// Two-color palette keyed by a hash of the prompt and seed, blended by
/// depth, with a horizontal brightness ramp. The tiling variant cross-fades
/// the last eighth of the columns back to column 0.
#[derive(Debug)]
pub struct MockGenerator {
    tiling: bool,
    calls: AtomicUsize,
}

impl MockGenerator {
    pub fn tiling() -> Self {
        Self { tiling: true, calls: AtomicUsize::new(0) }
    }

    /// Ignores the tiling flag; its seam is discontinuous on structured depth.
    pub fn non_tiling() -> Self {
        Self { tiling: false, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

struct Palette {
    near: [i64; 3],
    far: [i64; 3],
    ramp: i64,
}

fn palette(req: &GenerationRequest) -> Palette {
    let mut h = Sha256::new();
    h.update((req.prompt.len() as u64).to_le_bytes());
    h.update(req.prompt.as_bytes());
    h.update(req.seed.to_le_bytes());
    h.update(req.steps.to_le_bytes());
    let d = h.finalize();
    let chan = |b: u8| 32 + i64::from(b) % 192;
    Palette { near: [chan(d[0]), chan(d[1]), chan(d[2])], far: [chan(d[3]), chan(d[4]), chan(d[5])], ramp: 16 + i64::from(d[6]) % 48 }
}

impl GenerationBackend for MockGenerator {
    fn id(&self) -> &str {
        if self.tiling {
            "mock-generate-tiling"
        } else {
            "mock-generate-plain"
        }
    }

    fn generate(&self, req: &GenerationRequest) -> Result<RgbImage, StylizeError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let pal = palette(req);
        let (w, h) = req.depth.dimensions();
        let (wi, max) = (i64::from(w), 65535i64);
        let base = |x: u32, y: u32| -> [i64; 3] {
            let l = i64::from(req.depth.level(x, y));
            let r = pal.ramp * i64::from(x) / wi.max(1) - pal.ramp / 2;
            std::array::from_fn(|c| (pal.near[c] * l + pal.far[c] * (max - l) + max / 2) / max + r)
        };
        let band = (w / 8).max(1);
        let fade_from = w.saturating_sub(band + 1);
        Ok(RgbImage::from_fn(w, h, |x, y| {
            let mut px = base(x, y);
            if self.tiling && w >= 2 && x > fade_from {
                let (num, den) = (i64::from(x - fade_from), i64::from(w - 1 - fade_from));
                let first = base(0, y);
                for c in 0..3 {
                    px[c] = (px[c] * (den - num) + first[c] * num + den / 2) / den;
                }
            }
            Rgb(px.map(|v| v.clamp(0, 255) as u8))
        }))
    }
}

/// Bilinear interpolation; factor 1 returns the input unchanged.
#[derive(Debug, Default)]
pub struct MockUpscaler {
    calls: AtomicUsize,
}

impl MockUpscaler {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl UpscaleBackend for MockUpscaler {
    fn id(&self) -> &str {
        "mock-upscale-bilinear"
    }

    fn upscale(&self, image: &RgbImage, factor: u32) -> Result<RgbImage, StylizeError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if factor == 1 {
            return Ok(image.clone());
        }
        Ok(resize_bilinear(image, image.width() * factor, image.height() * factor))
    }
}
