use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{PanoramaError, PanoramaSource, StreetViewBackend, StreetViewHit};
use crate::geo::GeoCoordinate;
use crate::raster::{decode_rgb, encode_png, write_atomic};

/// Sidecar stored next to each cached response. Misses are cached too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoramaSidecar {
    pub hit: bool,
    pub anchor: Option<GeoCoordinate>,
    pub source: PanoramaSource,
    pub radius_used: f64,
}

/// On-disk cache in front of a street-view backend, keyed by
/// `(lat, lon, radius)` rounded to 1e-6 degrees:
/// `pano/<lat>_<lon>/<radius>.png` plus `<radius>.json`.
pub struct CachedStreetView<B> {
    inner: B,
    root: PathBuf,
    locks: Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>,
}

impl<B: StreetViewBackend> CachedStreetView<B> {
    pub fn new(inner: B, root: impl Into<PathBuf>) -> Self {
        Self { inner, root: root.into(), locks: Mutex::new(HashMap::new()) }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn key_dir(&self, at: GeoCoordinate) -> PathBuf {
        self.root.join("pano").join(format!("{:.6}_{:.6}", at.lat, at.lon))
    }

    fn stem(radius_m: f64) -> String {
        format!("{radius_m}")
    }

    fn read(dir: &Path, stem: &str) -> Result<Option<Option<StreetViewHit>>, PanoramaError> {
        let meta = dir.join(format!("{stem}.json"));
        let Ok(bytes) = std::fs::read(&meta) else {
            return Ok(None);
        };
        let side: PanoramaSidecar =
            serde_json::from_slice(&bytes).map_err(|e| PanoramaError::Format { what: "cache sidecar", reason: e.to_string() })?;
        if !side.hit {
            return Ok(Some(None));
        }
        let Some(anchor) = side.anchor else {
            return Err(PanoramaError::Format { what: "cache sidecar", reason: "hit without anchor".into() });
        };
        let image = decode_rgb(&std::fs::read(dir.join(format!("{stem}.png")))?)?;
        Ok(Some(Some(StreetViewHit { image, location: anchor })))
    }
}

impl<B: StreetViewBackend> StreetViewBackend for CachedStreetView<B> {
    fn lookup(&self, at: GeoCoordinate, radius_m: f64) -> Result<Option<StreetViewHit>, PanoramaError> {
        let dir = self.key_dir(at);
        let stem = Self::stem(radius_m);
        let key_lock = {
            let mut locks = self.locks.lock().expect("cache lock map poisoned");
            locks.entry(dir.join(&stem)).or_default().clone()
        };
        let _guard = key_lock.lock().expect("cache key lock poisoned");
        if let Some(cached) = Self::read(&dir, &stem)? {
            return Ok(cached);
        }
        let fetched = self.inner.lookup(at, radius_m)?;
        let side = PanoramaSidecar {
            hit: fetched.is_some(),
            anchor: fetched.as_ref().map(|h| h.location),
            source: PanoramaSource::StreetView,
            radius_used: radius_m,
        };
        if let Some(hit) = &fetched {
            write_atomic(&dir.join(format!("{stem}.png")), &encode_png(&hit.image))?;
        }
        let json = serde_json::to_vec_pretty(&side).expect("sidecar serializes");
        write_atomic(&dir.join(format!("{stem}.json")), &json)?;
        Ok(fetched)
    }
}
