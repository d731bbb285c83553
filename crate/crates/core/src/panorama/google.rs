//! Google Street View adapter: the metadata endpoint resolves the nearest
//! panorama within a radius, then the equirectangular image is stitched
//! from 512 px tiles.

use std::time::Duration;

use image::RgbImage;
use serde::Deserialize;

use super::{PanoramaError, StreetViewBackend, StreetViewHit};
use crate::geo::GeoCoordinate;
use crate::raster::decode_rgb;

pub const API_KEY_ENV: &str = "STREETVIEW_API_KEY";
const METADATA_URL: &str = "https://maps.googleapis.com/maps/api/streetview/metadata";
const TILE_URL: &str = "https://cbk0.google.com/cbk";
const TILE: u32 = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum StreetViewMetadata {
    Found { pano_id: String, location: GeoCoordinate },
    NotFound,
}

#[derive(Deserialize)]
struct RawMetadata {
    status: String,
    pano_id: Option<String>,
    location: Option<RawLocation>,
    error_message: Option<String>,
}

#[derive(Deserialize)]
struct RawLocation {
    lat: f64,
    lng: f64,
}

/// Parse a metadata response body.
pub fn parse_metadata(body: &[u8]) -> Result<StreetViewMetadata, PanoramaError> {
    let fmt = |reason: String| PanoramaError::Format { what: "street-view metadata", reason };
    let raw: RawMetadata = serde_json::from_slice(body).map_err(|e| fmt(e.to_string()))?;
    match raw.status.as_str() {
        "OK" => {
            let pano_id = raw.pano_id.filter(|p| !p.is_empty()).ok_or_else(|| fmt("OK without pano_id".into()))?;
            let loc = raw.location.ok_or_else(|| fmt("OK without location".into()))?;
            let location = GeoCoordinate::new(loc.lat, loc.lng).map_err(|e| fmt(e.to_string()))?;
            Ok(StreetViewMetadata::Found { pano_id, location })
        }
        "ZERO_RESULTS" | "NOT_FOUND" => Ok(StreetViewMetadata::NotFound),
        other => {
            Err(PanoramaError::BackendUnavailable(format!("{other}{}", raw.error_message.map(|m| format!(": {m}")).unwrap_or_default())))
        }
    }
}

/// Tile grid for a zoom level: `2^z` columns by `max(1, 2^(z-1))` rows,
/// cropped to a `512·2^z × 256·2^z` equirectangular image.
pub fn tile_grid(zoom: u32) -> (u32, u32, u32, u32) {
    let cols = 1u32 << zoom;
    let rows = (cols / 2).max(1);
    (cols, rows, TILE * cols, TILE * cols / 2)
}

pub fn stitch_tiles(zoom: u32, mut fetch: impl FnMut(u32, u32) -> Result<RgbImage, PanoramaError>) -> Result<RgbImage, PanoramaError> {
    let (cols, rows, width, height) = tile_grid(zoom);
    let mut out = RgbImage::new(width, height);
    for y in 0..rows {
        for x in 0..cols {
            let tile = fetch(x, y)?;
            for (tx, ty, p) in tile.enumerate_pixels() {
                let (ox, oy) = (x * TILE + tx, y * TILE + ty);
                if ox < width && oy < height {
                    out.put_pixel(ox, oy, *p);
                }
            }
        }
    }
    Ok(out)
}

pub struct GoogleStreetView {
    key: String,
    zoom: u32,
    client: reqwest::blocking::Client,
}

impl GoogleStreetView {
    pub fn new(key: impl Into<String>, zoom: u32) -> Result<Self, PanoramaError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| PanoramaError::BackendUnavailable(e.to_string()))?;
        Ok(Self { key: key.into(), zoom: zoom.min(5), client })
    }

    pub fn from_env(zoom: u32) -> Result<Self, PanoramaError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| PanoramaError::BackendUnavailable(format!("{API_KEY_ENV} is not set")))?;
        Self::new(key, zoom)
    }

    fn get(&self, url: &str, query: &[(&str, String)]) -> Result<Vec<u8>, PanoramaError> {
        let unavailable = |e: reqwest::Error| PanoramaError::BackendUnavailable(e.to_string());
        let resp = self.client.get(url).query(query).send().map_err(unavailable)?;
        let resp = resp.error_for_status().map_err(unavailable)?;
        Ok(resp.bytes().map_err(unavailable)?.to_vec())
    }
}

impl StreetViewBackend for GoogleStreetView {
    fn lookup(&self, at: GeoCoordinate, radius_m: f64) -> Result<Option<StreetViewHit>, PanoramaError> {
        let body = self.get(
            METADATA_URL,
            &[
                ("location", format!("{},{}", at.lat, at.lon)),
                ("radius", format!("{}", radius_m.round() as u64)),
                ("source", "outdoor".into()),
                ("key", self.key.clone()),
            ],
        )?;
        let StreetViewMetadata::Found { pano_id, location } = parse_metadata(&body)? else {
            return Ok(None);
        };
        let image = stitch_tiles(self.zoom, |x, y| {
            let bytes = self.get(
                TILE_URL,
                &[
                    ("output", "tile".into()),
                    ("panoid", pano_id.clone()),
                    ("zoom", self.zoom.to_string()),
                    ("x", x.to_string()),
                    ("y", y.to_string()),
                ],
            )?;
            Ok(decode_rgb(&bytes)?)
        })?;
        Ok(Some(StreetViewHit { image, location }))
    }
}
