//! Perceptual comparison of original and art panoramas: SSIM, SSIM over
//! Canny edge maps, and cosine similarity of 8-bin HOG descriptors.

mod canny;
mod hog;
mod ssim;
mod survey;

use std::io::{Read, Write};

use image::{GrayImage, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canny::{canny, CannyParams};
pub use hog::{hog, hog_cosine, hog_similarity, HogDescriptor, BINS as HOG_BINS, CELL as HOG_CELL};
pub use ssim::{ssim, SsimParams};
pub use survey::{export_survey_triplets, montage, SurveyItem};

use crate::raster::resize_bilinear;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("canny thresholds must satisfy 0 <= low < high <= 1 (got {low}, {high})")]
    BadThresholds { low: f64, high: f64 },
    #[error("image {width}x{height} is smaller than {min} px")]
    ImageTooSmall { width: u32, height: u32, min: u32 },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("no pairs to evaluate")]
    EmptyInput,
    #[error("need {needed} completed entries, found {found}")]
    TooFewEntries { needed: usize, found: usize },
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Integer luma `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let p = img.get_pixel(x, y);
        let l = (299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2]) + 500) / 1000;
        image::Luma([l as u8])
    })
}

pub fn ssim_edges(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    if a.dimensions() != b.dimensions() {
        return Err(MetricsError::DimMismatch { left: a.dimensions(), right: b.dimensions() });
    }
    let p = CannyParams::default();
    ssim(&canny(a, &p)?, &canny(b, &p)?, &SsimParams::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl MetricSummary {
    /// Population standard deviation. `None` for an empty slice.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = (values.iter().sum::<f64>() / n).clamp(min, max);
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt(), min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub artwork_id: String,
    pub ssim: f64,
    pub ssim_edges: f64,
    pub hog8: f64,
}

#[derive(Debug, Clone)]
pub struct PairInput {
    pub artwork_id: String,
    pub original: RgbImage,
    pub art: RgbImage,
}

pub const METRIC_NAMES: [&str; 3] = ["SSIM", "SSIM Edges", "HOG (8)"];
pub const PAIR_COLUMNS: [&str; 4] = ["artwork_id", "ssim", "ssim_edges", "hog8"];
pub const SUMMARY_COLUMNS: [&str; 5] = ["metric", "mean", "std", "min", "max"];

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub pairs: Vec<PairScores>,
    /// In `METRIC_NAMES` order.
    pub summary: [MetricSummary; 3],
    /// Pairs where either HOG descriptor had no gradient (scored 0).
    pub hog_degenerate: usize,
}

fn score_pair(p: &PairInput) -> Result<(PairScores, bool), MetricsError> {
    let art = resize_bilinear(&p.art, p.original.width(), p.original.height());
    let (a, b) = (to_grayscale(&p.original), to_grayscale(&art));
    let (ha, hb) = (hog(&a)?, hog(&b)?);
    let scores = PairScores {
        artwork_id: p.artwork_id.clone(),
        ssim: ssim(&a, &b, &SsimParams::default())?,
        ssim_edges: ssim_edges(&a, &b)?,
        hog8: hog_cosine(&ha, &hb),
    };
    Ok((scores, ha.is_degenerate() || hb.is_degenerate()))
}

/// Grayscale comparison of each pair after bilinearly resampling the art
/// panorama to the original's dimensions.
pub fn evaluate_pairs(pairs: &[PairInput]) -> Result<EvaluationReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let scored = pairs.par_iter().map(score_pair).collect::<Result<Vec<_>, _>>()?;
    let hog_degenerate = scored.iter().filter(|(_, d)| *d).count();
    let pairs: Vec<PairScores> = scored.into_iter().map(|(s, _)| s).collect();
    Ok(EvaluationReport { summary: summarize(&pairs)?, pairs, hog_degenerate })
}

pub fn summarize(pairs: &[PairScores]) -> Result<[MetricSummary; 3], MetricsError> {
    let col = |f: fn(&PairScores) -> f64| MetricSummary::from_values(&pairs.iter().map(f).collect::<Vec<_>>());
    match (col(|p| p.ssim), col(|p| p.ssim_edges), col(|p| p.hog8)) {
        (Some(a), Some(b), Some(c)) => Ok([a, b, c]),
        _ => Err(MetricsError::EmptyInput),
    }
}

pub fn write_pairs_csv<W: Write>(pairs: &[PairScores], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PAIR_COLUMNS)?;
    for p in pairs {
        w.write_record([p.artwork_id.clone(), p.ssim.to_string(), p.ssim_edges.to_string(), p.hog8.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs_csv<R: Read>(input: R) -> Result<Vec<PairScores>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(input);
    if rdr.headers()?.iter().ne(PAIR_COLUMNS) {
        return Err(MetricsError::Format { what: "pairs csv", reason: "header must be artwork_id,ssim,ssim_edges,hog8".into() });
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let num =
                |c: usize| {
                    rec.get(c).unwrap_or("").parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| MetricsError::Format {
                        what: "pairs csv",
                        reason: format!("row {}: bad {}", i + 1, PAIR_COLUMNS[c]),
                    })
                };
            Ok(PairScores { artwork_id: rec.get(0).unwrap_or("").to_owned(), ssim: num(1)?, ssim_edges: num(2)?, hog8: num(3)? })
        })
        .collect()
}

/// One row per metric, columns mean/std/min/max.
pub fn write_summary_csv<W: Write>(summary: &[MetricSummary; 3], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for (name, s) in METRIC_NAMES.iter().zip(summary) {
        w.write_record([name.to_string(), s.mean.to_string(), s.std.to_string(), s.min.to_string(), s.max.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<(String, MetricSummary)>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(input);
    if rdr.headers()?.iter().ne(SUMMARY_COLUMNS) {
        return Err(MetricsError::Format { what: "summary csv", reason: "header must be metric,mean,std,min,max".into() });
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let num = |c: usize| {
                rec.get(c).unwrap_or("").parse::<f64>().map_err(|e| MetricsError::Format { what: "summary csv", reason: e.to_string() })
            };
            Ok((rec.get(0).unwrap_or("").to_owned(), MetricSummary { mean: num(1)?, std: num(2)?, min: num(3)?, max: num(4)? }))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn pano(seed: u32) -> RgbImage {
        RgbImage::from_fn(64, 32, |x, y| Rgb([((x * 7 + y * seed) % 256) as u8, ((x * y + seed) % 256) as u8, (y * 8) as u8]))
    }

    #[test]
    fn grayscale_values() {
        let g = to_grayscale(&RgbImage::from_fn(3, 1, |x, _| [Rgb([255, 255, 255]), Rgb([255, 0, 0]), Rgb([77, 77, 77])][x as usize]));
        assert_eq!(g.as_raw(), &[255, 76, 77]);
    }

    #[test]
    fn identical_pairs_score_one() {
        let pairs: Vec<_> = (1..4).map(|s| PairInput { artwork_id: format!("a{s}"), original: pano(s), art: pano(s) }).collect();
        let r = evaluate_pairs(&pairs).unwrap();
        for s in r.summary {
            assert!((s.mean - 1.0).abs() < 1e-9 && s.std < 1e-9, "{s:?}");
        }
    }

    #[test]
    fn upscaled_art_is_downscaled_first() {
        let original = pano(3);
        let art = resize_bilinear(&pano(5), 256, 128);
        let r = evaluate_pairs(&[PairInput { artwork_id: "x".into(), original, art }]).unwrap();
        let s = &r.summary[0];
        assert_eq!((s.mean, s.min, s.max, s.std), (r.pairs[0].ssim, r.pairs[0].ssim, r.pairs[0].ssim, 0.0));
    }

    #[test]
    fn summary_population_std() {
        let s = MetricSummary::from_values(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.min, s.max), (2.0, 1.0, 1.0, 3.0));
        assert!(MetricSummary::from_values(&[]).is_none());
        assert!(evaluate_pairs(&[]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let pairs = vec![
            PairScores { artwork_id: "a".into(), ssim: 0.1 + 0.2, ssim_edges: 1.0 / 3.0, hog8: 0.651 },
            PairScores { artwork_id: "b".into(), ssim: -0.25, ssim_edges: 0.0, hog8: 1.0 },
        ];
        let mut buf = Vec::new();
        write_pairs_csv(&pairs, &mut buf).unwrap();
        assert_eq!(read_pairs_csv(buf.as_slice()).unwrap(), pairs);
        let summary = summarize(&pairs).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&summary, &mut buf).unwrap();
        let back = read_summary_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[1].0, "SSIM Edges");
        assert_eq!(back[2].1, summary[2]);
    }

    #[test]
    fn edges_ignore_contrast_inversion() {
        let img = crate::raster::gray_from_fn(64, 64, |x, y| if (16..48).contains(&x) && (20..40).contains(&y) { 200 } else { 40 });
        let inv = crate::raster::gray_from_fn(64, 64, |x, y| 255 - img.get_pixel(x, y)[0]);
        assert!((ssim_edges(&img, &inv).unwrap() - 1.0).abs() < 1e-6);
        assert!((ssim_edges(&img, &img).unwrap() - 1.0).abs() < 1e-12);
    }
}
