use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_equirectangular, EquirectCheck, Panorama, PanoramaError, PanoramaSource};
use crate::geo::GeoCoordinate;
use crate::raster::load_rgb;
use crate::seed::stable_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terrain {
    Sea,
    Forest,
}

pub trait TerrainClassifier: Send + Sync {
    fn classify(&self, at: GeoCoordinate) -> Terrain;
}

pub struct ConstantClassifier(pub Terrain);

impl TerrainClassifier for ConstantClassifier {
    fn classify(&self, _: GeoCoordinate) -> Terrain {
        self.0
    }
}

/// Points inside any water ring are sea, everything else forest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolygonClassifier {
    /// Rings of (lon, lat) vertices; closing vertex optional.
    pub water: Vec<Vec<(f64, f64)>>,
}

#[derive(Deserialize)]
struct WaterFile {
    water: Vec<Vec<[f64; 2]>>,
}

/// Parse `{"water": [[[lon, lat], ...], ...]}`.
pub fn parse_water_polygons(bytes: &[u8]) -> Result<PolygonClassifier, PanoramaError> {
    let fmt = |reason: String| PanoramaError::Format { what: "water polygons", reason };
    let f: WaterFile = serde_json::from_slice(bytes).map_err(|e| fmt(e.to_string()))?;
    let mut water = Vec::with_capacity(f.water.len());
    for ring in f.water {
        if ring.len() < 3 {
            return Err(fmt("ring needs at least 3 vertices".into()));
        }
        if ring.iter().flatten().any(|v| !v.is_finite()) {
            return Err(fmt("non-finite vertex".into()));
        }
        water.push(ring.into_iter().map(|[lon, lat]| (lon, lat)).collect());
    }
    Ok(PolygonClassifier { water })
}

fn point_in_ring(ring: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = ring.len() - 1;
    for i in 0..ring.len() {
        let (xi, yi) = ring[i];
        let (xj, yj) = ring[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

impl TerrainClassifier for PolygonClassifier {
    fn classify(&self, at: GeoCoordinate) -> Terrain {
        if self.water.iter().any(|r| point_in_ring(r, at.lon, at.lat)) {
            Terrain::Sea
        } else {
            Terrain::Forest
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FallbackAsset {
    pub name: String,
    pub image: image::RgbImage,
}

pub struct FallbackLibrary {
    sea: Vec<FallbackAsset>,
    forest: Vec<FallbackAsset>,
    classifier: Box<dyn TerrainClassifier>,
}

impl FallbackLibrary {
    pub fn new(sea: Vec<FallbackAsset>, forest: Vec<FallbackAsset>, classifier: Box<dyn TerrainClassifier>) -> Result<Self, PanoramaError> {
        if sea.is_empty() {
            return Err(PanoramaError::EmptyLibrary(Terrain::Sea));
        }
        if forest.is_empty() {
            return Err(PanoramaError::EmptyLibrary(Terrain::Forest));
        }
        Ok(Self { sea, forest, classifier })
    }

    /// `<dir>/sea/*.png`, `<dir>/forest/*.png` (sorted by name) and an
    /// optional `<dir>/water.json` for the polygon classifier.
    pub fn load_dir(dir: &Path) -> Result<Self, PanoramaError> {
        let load = |sub: &str| -> Result<Vec<FallbackAsset>, PanoramaError> {
            let mut paths: Vec<_> = match std::fs::read_dir(dir.join(sub)) {
                Ok(rd) => rd.filter_map(Result::ok).map(|e| e.path()).filter(|p| p.extension().is_some_and(|e| e == "png")).collect(),
                Err(_) => Vec::new(),
            };
            paths.sort();
            paths
                .into_iter()
                .map(|p| {
                    let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    Ok(FallbackAsset { name: format!("{sub}/{name}"), image: load_rgb(&p)? })
                })
                .collect()
        };
        let classifier: Box<dyn TerrainClassifier> = match std::fs::read(dir.join("water.json")) {
            Ok(bytes) => Box::new(parse_water_polygons(&bytes)?),
            Err(_) => Box::new(PolygonClassifier::default()),
        };
        Self::new(load("sea")?, load("forest")?, classifier)
    }

    pub fn classify(&self, at: GeoCoordinate) -> Terrain {
        self.classifier.classify(at)
    }

    pub fn assets(&self, terrain: Terrain) -> &[FallbackAsset] {
        match terrain {
            Terrain::Sea => &self.sea,
            Terrain::Forest => &self.forest,
        }
    }

    /// Index of the asset chosen for a coordinate.
    pub fn pick(&self, at: GeoCoordinate, seed: u64) -> Result<(Terrain, usize), PanoramaError> {
        let terrain = self.classify(at);
        let n = self.assets(terrain).len();
        if n == 0 {
            return Err(PanoramaError::EmptyLibrary(terrain));
        }
        let h = stable_hash(&[&seed.to_le_bytes(), &at.lat.to_bits().to_le_bytes(), &at.lon.to_bits().to_le_bytes()]);
        Ok((terrain, (h % n as u64) as usize))
    }
}

/// Seeded, coordinate-keyed choice of a sea or forest asset, normalized to 2:1.
pub fn select_fallback(coord: GeoCoordinate, library: &FallbackLibrary, seed: u64) -> Result<Panorama, PanoramaError> {
    let (terrain, idx) = library.pick(coord, seed)?;
    let asset = &library.assets(terrain)[idx];
    let source = match terrain {
        Terrain::Sea => PanoramaSource::FallbackSea,
        Terrain::Forest => PanoramaSource::FallbackForest,
    };
    let pano = Panorama { pixels: asset.image.clone(), source, anchor: coord, radius_used: 0.0 };
    match validate_equirectangular(&pano) {
        EquirectCheck::Ok => Ok(pano),
        EquirectCheck::Cropped { panorama, .. } => Ok(panorama),
        v @ EquirectCheck::Violation { .. } => {
            Err(PanoramaError::Format { what: "fallback asset", reason: format!("{}: {}", asset.name, v.report()) })
        }
    }
}
