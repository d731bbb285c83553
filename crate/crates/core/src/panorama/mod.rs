//! Street-view panoramas at (fictional) coordinates, with radius escalation
//! and pre-supplied sea/forest fallbacks where no imagery exists.

mod cache;
mod equirect;
mod fallback;
mod google;
mod mock;
mod throttle;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoCoordinate;

pub use cache::{CachedStreetView, PanoramaSidecar};
pub use equirect::{validate_equirectangular, EquirectCheck};
pub use fallback::{
    parse_water_polygons, select_fallback, ConstantClassifier, FallbackLibrary, PolygonClassifier, Terrain, TerrainClassifier,
};
pub use google::{parse_metadata, stitch_tiles, tile_grid, GoogleStreetView, StreetViewMetadata, API_KEY_ENV};
pub use mock::{parse_mock_manifest, MockEntry, MockStreetView};
pub use throttle::RateLimited;

/// Hard cap on the search radius in meters.
pub const MAX_RADIUS_M: f64 = 250.0;

#[derive(Debug, Error)]
pub enum PanoramaError {
    #[error("street-view backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no panorama within {max_radius} m of ({lat}, {lon})")]
    FallbackNeeded { lat: f64, lon: f64, max_radius: f64 },
    #[error("fallback library has no {0:?} assets")]
    EmptyLibrary(Terrain),
    #[error("invalid fetch policy: {0}")]
    BadPolicy(String),
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanoramaSource {
    StreetView,
    FallbackSea,
    FallbackForest,
}

impl PanoramaSource {
    pub fn is_fallback(self) -> bool {
        self != PanoramaSource::StreetView
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PanoramaSource::StreetView => "street_view",
            PanoramaSource::FallbackSea => "fallback_sea",
            PanoramaSource::FallbackForest => "fallback_forest",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panorama {
    pub pixels: RgbImage,
    pub source: PanoramaSource,
    /// Where the imagery actually comes from (the requested point for fallbacks).
    pub anchor: GeoCoordinate,
    /// Radius at which the panorama was found; 0 for fallback assets.
    pub radius_used: f64,
}

impl Panorama {
    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchPolicy {
    radii: Vec<f64>,
}

impl FetchPolicy {
    /// Radii must be positive, strictly increasing, and end at the cap.
    pub fn new(radii: Vec<f64>) -> Result<Self, PanoramaError> {
        if radii.is_empty() {
            return Err(PanoramaError::BadPolicy("empty radius schedule".into()));
        }
        if radii.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(PanoramaError::BadPolicy("radii must be positive".into()));
        }
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PanoramaError::BadPolicy("radii must be strictly increasing".into()));
        }
        if *radii.last().expect("non-empty") != MAX_RADIUS_M {
            return Err(PanoramaError::BadPolicy(format!("last radius must be {MAX_RADIUS_M} m")));
        }
        Ok(Self { radii })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn max_radius(&self) -> f64 {
        MAX_RADIUS_M
    }
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self { radii: vec![10.0, 25.0, 50.0, 100.0, 250.0] }
    }
}

/// A panorama returned by a backend together with its true location.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetViewHit {
    pub image: RgbImage,
    pub location: GeoCoordinate,
}

/// `(lat, lon, radius) -> optional (panorama, true location)`.
pub trait StreetViewBackend: Send + Sync {
    fn lookup(&self, at: GeoCoordinate, radius_m: f64) -> Result<Option<StreetViewHit>, PanoramaError>;
}

impl<B: StreetViewBackend + ?Sized> StreetViewBackend for &B {
    fn lookup(&self, at: GeoCoordinate, radius_m: f64) -> Result<Option<StreetViewHit>, PanoramaError> {
        (**self).lookup(at, radius_m)
    }
}

impl<B: StreetViewBackend + ?Sized> StreetViewBackend for Box<B> {
    fn lookup(&self, at: GeoCoordinate, radius_m: f64) -> Result<Option<StreetViewHit>, PanoramaError> {
        (**self).lookup(at, radius_m)
    }
}

/// Query radii in ascending order; the first hit wins.
pub fn fetch_panorama(coord: GeoCoordinate, policy: &FetchPolicy, backend: &dyn StreetViewBackend) -> Result<Panorama, PanoramaError> {
    for &radius in policy.radii() {
        debug_assert!(radius <= MAX_RADIUS_M);
        if let Some(hit) = backend.lookup(coord, radius)? {
            return Ok(Panorama { pixels: hit.image, source: PanoramaSource::StreetView, anchor: hit.location, radius_used: radius });
        }
    }
    Err(PanoramaError::FallbackNeeded { lat: coord.lat, lon: coord.lon, max_radius: policy.max_radius() })
}

/// Offset a coordinate by meters north/east (small-distance approximation).
pub fn offset_m(c: GeoCoordinate, north: f64, east: f64) -> GeoCoordinate {
    const M_PER_DEG: f64 = 111_195.08;
    GeoCoordinate { lat: c.lat + north / M_PER_DEG, lon: c.lon + east / (M_PER_DEG * c.lat.to_radians().cos()) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn helsinki() -> GeoCoordinate {
        GeoCoordinate::new(60.1699, 24.9384).unwrap()
    }

    fn mock_with(at_m: f64) -> MockStreetView {
        let pano = offset_m(helsinki(), at_m, 0.0);
        MockStreetView::from_entries(vec![(pano, RgbImage::from_pixel(64, 32, Rgb([1, 2, 3])))])
    }

    #[test]
    fn near_panorama_hits_first_radius() {
        let backend = mock_with(5.0);
        let p = fetch_panorama(helsinki(), &FetchPolicy::default(), &backend).unwrap();
        assert_eq!(p.radius_used, 10.0);
        assert_eq!(p.source, PanoramaSource::StreetView);
        assert!((p.anchor.haversine_m(&helsinki()) - 5.0).abs() < 0.1);
        assert_eq!(backend.queries(), 1);
    }

    #[test]
    fn far_panorama_hits_last_radius() {
        let backend = mock_with(180.0);
        let p = fetch_panorama(helsinki(), &FetchPolicy::default(), &backend).unwrap();
        assert_eq!(p.radius_used, 250.0);
        assert_eq!(backend.queries(), 5);
        assert!(backend.max_radius_seen() <= MAX_RADIUS_M);
    }

    #[test]
    fn open_sea_needs_fallback() {
        let backend = MockStreetView::from_entries(vec![]);
        let sea = GeoCoordinate::new(60.05, 24.95).unwrap();
        let r = fetch_panorama(sea, &FetchPolicy::default(), &backend);
        assert!(matches!(r, Err(PanoramaError::FallbackNeeded { .. })));
        assert_eq!(backend.queries(), 5);
        let beyond = mock_with(300.0);
        assert!(matches!(fetch_panorama(helsinki(), &FetchPolicy::default(), &beyond), Err(PanoramaError::FallbackNeeded { .. })));
    }

    #[test]
    fn policy_validation() {
        assert!(FetchPolicy::new(vec![10.0, 250.0]).is_ok());
        assert!(FetchPolicy::new(vec![10.0, 300.0]).is_err());
        assert!(FetchPolicy::new(vec![50.0, 25.0, 250.0]).is_err());
        assert!(FetchPolicy::new(vec![]).is_err());
        assert!(FetchPolicy::new(vec![0.0, 250.0]).is_err());
    }
}
