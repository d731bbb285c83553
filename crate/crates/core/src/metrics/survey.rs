use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::MetricsError;
use crate::raster::{encode_png, resize_bilinear, write_atomic};

pub struct SurveyItem {
    pub artwork_id: String,
    /// `None` renders a gray placeholder.
    pub artwork: Option<RgbImage>,
    pub panorama: RgbImage,
    pub art: RgbImage,
}

const PLACEHOLDER: Rgb<u8> = Rgb([128, 128, 128]);

/// Artwork top-left, original panorama top-right, art panorama across the
/// bottom at the top row's width.
pub fn montage(item: &SurveyItem) -> RgbImage {
    let h = item.panorama.height().max(1);
    let left = match &item.artwork {
        Some(a) if a.width() > 0 && a.height() > 0 => {
            let w = ((f64::from(a.width()) * f64::from(h) / f64::from(a.height())).round() as u32).max(1);
            resize_bilinear(a, w, h)
        }
        _ => RgbImage::from_pixel(h, h, PLACEHOLDER),
    };
    let top_w = left.width() + item.panorama.width();
    let bottom_h = ((f64::from(item.art.height()) * f64::from(top_w) / f64::from(item.art.width().max(1))).round() as u32).max(1);
    let bottom = resize_bilinear(&item.art, top_w, bottom_h);
    let mut out = RgbImage::from_pixel(top_w, h + bottom_h, PLACEHOLDER);
    image::imageops::replace(&mut out, &left, 0, 0);
    image::imageops::replace(&mut out, &item.panorama, i64::from(left.width()), 0);
    image::imageops::replace(&mut out, &bottom, 0, i64::from(h));
    out
}

/// Picks `n` of `ids` with a seeded draw and writes one montage per pick.
pub fn export_survey_triplets(
    ids: &[String],
    n: usize,
    seed: u64,
    out_dir: &Path,
    load: impl Fn(&str) -> Result<SurveyItem, MetricsError>,
) -> Result<Vec<PathBuf>, MetricsError> {
    if n > ids.len() {
        return Err(MetricsError::TooFewEntries { needed: n, found: ids.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, ids.len(), n);
    let mut written = Vec::with_capacity(n);
    for (k, i) in picks.into_iter().enumerate() {
        let item = load(&ids[i])?;
        let path = out_dir.join(format!("survey_{:02}_{}.png", k + 1, item.artwork_id));
        write_atomic(&path, &encode_png(&montage(&item)))?;
        written.push(path);
    }
    Ok(written)
}
