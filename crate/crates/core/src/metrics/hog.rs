use image::GrayImage;

use super::MetricsError;

pub const CELL: u32 = 16;
pub const BINS: usize = 8;
const BIN_WIDTH: f64 = 180.0 / BINS as f64;

/// Concatenated per-cell orientation histograms, row-major over cells.
#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor {
    pub cells_x: u32,
    pub cells_y: u32,
    pub values: Vec<f64>,
}

impl HogDescriptor {
    pub fn cell(&self, cx: u32, cy: u32) -> &[f64] {
        let i = (cy * self.cells_x + cx) as usize * BINS;
        &self.values[i..i + BINS]
    }

    pub fn is_degenerate(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Unsigned orientations in `[0, 180)` with bins centered on multiples of
/// 22.5 degrees, magnitude-weighted and linearly split between the two
/// nearest bins (wrapping at 180). Each non-empty cell is L1-normalized.
pub fn hog(img: &GrayImage) -> Result<HogDescriptor, MetricsError> {
    let (w, h) = img.dimensions();
    if w < CELL || h < CELL {
        return Err(MetricsError::ImageTooSmall { width: w, height: h, min: CELL });
    }
    let (cells_x, cells_y) = (w / CELL, h / CELL);
    let px = |x: i64, y: i64| f64::from(img.get_pixel(x.clamp(0, i64::from(w) - 1) as u32, y.clamp(0, i64::from(h) - 1) as u32)[0]);
    let mut values = vec![0.0; (cells_x * cells_y) as usize * BINS];
    for y in 0..cells_y * CELL {
        for x in 0..cells_x * CELL {
            let (xi, yi) = (i64::from(x), i64::from(y));
            let gx = px(xi + 1, yi) - px(xi - 1, yi);
            let gy = px(xi, yi + 1) - px(xi, yi - 1);
            let m = gx.hypot(gy);
            if m == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let pos = theta / BIN_WIDTH;
            let b0 = pos.floor() as usize % BINS;
            let frac = pos - pos.floor();
            let base = ((y / CELL) * cells_x + x / CELL) as usize * BINS;
            values[base + b0] += m * (1.0 - frac);
            values[base + (b0 + 1) % BINS] += m * frac;
        }
    }
    for cell in values.chunks_mut(BINS) {
        let s: f64 = cell.iter().sum();
        if s > 0.0 {
            cell.iter_mut().for_each(|v| *v /= s);
        }
    }
    Ok(HogDescriptor { cells_x, cells_y, values })
}

/// Cosine similarity; 0 when either descriptor has no gradient at all.
pub fn hog_cosine(a: &HogDescriptor, b: &HogDescriptor) -> f64 {
    let dot: f64 = a.values.iter().zip(&b.values).map(|(p, q)| p * q).sum();
    let na = a.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn hog_similarity(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    if a.dimensions() != b.dimensions() {
        return Err(MetricsError::DimMismatch { left: a.dimensions(), right: b.dimensions() });
    }
    Ok(hog_cosine(&hog(a)?, &hog(b)?))
}
