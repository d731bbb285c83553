use serde::{Deserialize, Serialize};

use super::{GeoCoordinate, GeoError};

/// Errors in degree units. Each item contributes the mean over its two components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrors {
    pub mae: f64,
    pub mse: f64,
}

/// Reduction recorded next to reported errors.
pub const ERROR_REDUCTION: &str = "per-item mean over (lat, lon) components, then mean over items; degrees";

pub fn evaluate_predictions(pred: &[GeoCoordinate], truth: &[GeoCoordinate]) -> Result<PredictionErrors, GeoError> {
    if pred.len() != truth.len() {
        return Err(GeoError::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Err(GeoError::EmptyInput);
    }
    let n = pred.len() as f64;
    let (mut mae, mut mse) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let (dl, dn) = (p.lat - t.lat, p.lon - t.lon);
        mae += (dl.abs() + dn.abs()) / 2.0;
        mse += (dl * dl + dn * dn) / 2.0;
    }
    Ok(PredictionErrors { mae: mae / n, mse: mse / n })
}

/// Mean planar distance of the points from their centroid.
pub fn dispersion(points: &[GeoCoordinate]) -> Result<f64, GeoError> {
    if points.is_empty() {
        return Err(GeoError::EmptyInput);
    }
    let n = points.len() as f64;
    let c = GeoCoordinate { lat: points.iter().map(|p| p.lat).sum::<f64>() / n, lon: points.iter().map(|p| p.lon).sum::<f64>() / n };
    Ok(points.iter().map(|p| p.planar_distance(&c)).sum::<f64>() / n)
}
