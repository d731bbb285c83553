use serde::{Deserialize, Serialize};

use super::{GeoCoordinate, GeoError};

/// Complementary softmax weights for the three nearest neighbors.
/// Each weight lies in [0, 1] and they sum to 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangulationWeights {
    pub w: [f64; 3],
}

impl TriangulationWeights {
    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// How the weighted sum is reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Σ wⱼyⱼ / 3, literally. Σw = 2 pulls results toward the origin.
    AsWritten,
    /// Σ wⱼyⱼ / Σ wⱼ, stays inside the neighbors' hull.
    #[default]
    Normalized,
}

impl std::str::FromStr for WeightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as_written" | "as-written" => Ok(Self::AsWritten),
            "normalized" => Ok(Self::Normalized),
            other => Err(format!("unknown weight mode `{other}`")),
        }
    }
}

pub fn triangulate_centroid(coords: &[GeoCoordinate; 3]) -> GeoCoordinate {
    GeoCoordinate { lat: (coords[0].lat + coords[1].lat + coords[2].lat) / 3.0, lon: (coords[0].lon + coords[1].lon + coords[2].lon) / 3.0 }
}

/// `w_j = 1 - softmax(d)[j]` on raw distances, max-shifted before exponentiation.
pub fn softmax_complement_weights(d: [f64; 3]) -> Result<TriangulationWeights, GeoError> {
    if d.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(GeoError::NonFiniteDistance);
    }
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = d.map(|x| (x - max).exp());
    let total: f64 = e.iter().sum();
    Ok(TriangulationWeights { w: e.map(|x| 1.0 - x / total) })
}

pub fn triangulate_weighted(coords: &[GeoCoordinate; 3], w: &TriangulationWeights, mode: WeightMode) -> GeoCoordinate {
    if mode == WeightMode::Normalized && w.w[0] == w.w[1] && w.w[1] == w.w[2] {
        return triangulate_centroid(coords);
    }
    let lat: f64 = coords.iter().zip(w.w).map(|(c, w)| w * c.lat).sum();
    let lon: f64 = coords.iter().zip(w.w).map(|(c, w)| w * c.lon).sum();
    let denom = match mode {
        WeightMode::AsWritten => 3.0,
        WeightMode::Normalized => w.sum(),
    };
    GeoCoordinate { lat: lat / denom, lon: lon / denom }
}
