use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{PanoramaError, StreetViewBackend, StreetViewHit};
use crate::geo::GeoCoordinate;
use crate::raster::load_rgb;

/// One line of a mock directory manifest (`manifest.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub lat: f64,
    pub lon: f64,
    pub file: PathBuf,
}

#[derive(Debug, Deserialize)]
struct ManifestFile {
    panoramas: Vec<MockEntry>,
}

/// Parse a mock manifest: `{"panoramas": [{"lat": .., "lon": .., "file": "a.png"}]}`.
/// File names must stay inside the manifest directory.
pub fn parse_mock_manifest(bytes: &[u8]) -> Result<Vec<MockEntry>, PanoramaError> {
    let fmt = |reason: String| PanoramaError::Format { what: "mock manifest", reason };
    let m: ManifestFile = serde_json::from_slice(bytes).map_err(|e| fmt(e.to_string()))?;
    for e in &m.panoramas {
        GeoCoordinate::new(e.lat, e.lon).map_err(|err| fmt(err.to_string()))?;
        let relative = e.file.components().all(|c| matches!(c, std::path::Component::Normal(_)));
        if !relative || e.file.as_os_str().is_empty() {
            return Err(fmt(format!("file `{}` must be a relative path without `..`", e.file.display())));
        }
    }
    Ok(m.panoramas)
}

/// In-process street-view stand-in: returns the nearest stored panorama
/// within the query radius (great-circle meters). Entries naming the same
/// file share one decoded image.
#[derive(Debug, Default)]
pub struct MockStreetView {
    entries: Vec<(GeoCoordinate, usize)>,
    images: Vec<RgbImage>,
    queries: AtomicUsize,
    max_radius_bits: AtomicU64,
}

impl MockStreetView {
    pub fn from_entries(entries: Vec<(GeoCoordinate, RgbImage)>) -> Self {
        let (coords, images): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        Self { entries: coords.into_iter().zip(0..).collect(), images, ..Default::default() }
    }

    pub fn from_dir(dir: &Path) -> Result<Self, PanoramaError> {
        let manifest = std::fs::read(dir.join("manifest.json"))?;
        let mut by_file: HashMap<PathBuf, usize> = HashMap::new();
        let mut images = Vec::new();
        let mut entries = Vec::new();
        for e in parse_mock_manifest(&manifest)? {
            let idx = match by_file.get(&e.file) {
                Some(&i) => i,
                None => {
                    images.push(load_rgb(&dir.join(&e.file))?);
                    by_file.insert(e.file.clone(), images.len() - 1);
                    images.len() - 1
                }
            };
            entries.push((GeoCoordinate { lat: e.lat, lon: e.lon }, idx));
        }
        Ok(Self { entries, images, ..Default::default() })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn queries(&self) -> usize {
        self.queries.load(Ordering::SeqCst)
    }

    pub fn max_radius_seen(&self) -> f64 {
        f64::from_bits(self.max_radius_bits.load(Ordering::SeqCst))
    }
}

impl StreetViewBackend for MockStreetView {
    fn lookup(&self, at: GeoCoordinate, radius_m: f64) -> Result<Option<StreetViewHit>, PanoramaError> {
        self.queries.fetch_add(1, Ordering::SeqCst);
        self.max_radius_bits.fetch_max(radius_m.to_bits(), Ordering::SeqCst);
        let best = self
            .entries
            .iter()
            .map(|(c, idx)| (at.haversine_m(c), c, *idx))
            .filter(|(d, _, _)| *d <= radius_m)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        Ok(best.map(|(_, c, idx)| StreetViewHit { image: self.images[idx].clone(), location: *c }))
    }
}
