//! Synthetic collections for demos and tests: public/indoor records whose
//! embeddings are a random linear lift of their coordinates plus Gaussian
//! noise, a mock street-view directory covering the land part of the box,
//! and a fallback library whose water polygon covers the southern strip.

use std::path::Path;

use image::{Rgb, RgbImage};
use indexmap::IndexMap;
use ncity_core::catalog::{encode_embeddings, write_catalog, ArtworkKind, ArtworkRecord, Catalog, EmbeddingMap, EmbeddingVector};
use ncity_core::geo::GeoCoordinate;
use ncity_core::raster::{encode_png, write_atomic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub public: usize,
    pub indoor: usize,
    pub dim: usize,
    pub noise: f64,
    /// South-west corner of the box.
    pub origin: GeoCoordinate,
    pub box_deg: f64,
    /// Fraction of the box (from the south) that is open sea.
    pub sea_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            public: 300,
            indoor: 300,
            dim: 32,
            noise: DEFAULT_NOISE,
            origin: GeoCoordinate { lat: 60.05, lon: 24.75 },
            box_deg: 0.4,
            sea_fraction: 0.15,
            seed: 0,
        }
    }
}

/// Noise level relative to a lift with unit-variance coefficients over
/// coordinates scaled to [-0.5, 0.5].
pub const DEFAULT_NOISE: f64 = 4.0;

pub struct SynthCollection {
    pub catalog: Catalog,
    /// True locations of the indoor records.
    pub hidden: IndexMap<String, GeoCoordinate>,
}

const STYLES: [&str; 6] = ["woodcut", "watercolor", "etching", "oil on canvas", "ink wash", "gouache"];
const ARTISTS: [&str; 5] = ["Unknown", "A. Lind", "M. Saari", "K. Berg", "R. Holm"];

pub fn synth_collection(spec: &SynthSpec) -> SynthCollection {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lift: Vec<[f64; 2]> = (0..spec.dim).map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect();
    let mut records = IndexMap::new();
    let mut embeddings = EmbeddingMap::new();
    let mut hidden = IndexMap::new();
    let n = spec.public + spec.indoor;
    for i in 0..n {
        let (kind, id) = if i < spec.public {
            (ArtworkKind::Public, format!("p{i:04}"))
        } else {
            (ArtworkKind::Indoor, format!("i{:04}", i - spec.public))
        };
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let at = GeoCoordinate { lat: spec.origin.lat + u * spec.box_deg, lon: spec.origin.lon + v * spec.box_deg };
        let values: Vec<f32> = lift
            .iter()
            .map(|a| {
                let e: f64 = StandardNormal.sample(&mut rng);
                (a[0] * (u - 0.5) + a[1] * (v - 0.5) + spec.noise * e) as f32
            })
            .collect();
        let style = STYLES[rng.random_range(0..STYLES.len())];
        let artist = ARTISTS[rng.random_range(0..ARTISTS.len())];
        let record = ArtworkRecord {
            id: id.clone(),
            object_id: format!("{}", 100_000 + i),
            title: format!("Study {i}"),
            artist: artist.into(),
            date: format!("{}", 1850 + rng.random_range(0..150)),
            keywords: vec![style.into()],
            kind,
            prompt: format!("a city street painted as {style}"),
            coordinate: (kind == ArtworkKind::Public).then_some(at),
            image_ref: format!("artworks/{id}.png"),
        };
        if kind == ArtworkKind::Indoor {
            hidden.insert(id.clone(), at);
        }
        embeddings.insert(id.clone(), EmbeddingVector::new(values).expect("finite"));
        records.insert(id, record);
    }
    SynthCollection { catalog: Catalog { records, embeddings }, hidden }
}

/// Grid steps of the mock street-view coverage, chosen so every land point
/// lies within about 160 m of a panorama.
const GRID_LAT: f64 = 0.002;
const GRID_LON: f64 = 0.004;
const PANO_VARIANTS: usize = 4;

fn street_scene(variant: usize, w: u32) -> RgbImage {
    let h = w / 2;
    let horizon = h * 11 / 20;
    let blocks = 5 + variant as u32 * 2;
    RgbImage::from_fn(w, h, |x, y| {
        if y < horizon {
            let block = x * blocks / w;
            let top = horizon / 4 + (block * 37 + variant as u32 * 11) % (horizon / 2);
            if y > top {
                let shade = 60 + ((block * 53 + variant as u32 * 29) % 120) as u8;
                let window = (x % 8 < 3) && (y % 10 < 4);
                if window {
                    Rgb([230, 220, 150])
                } else {
                    Rgb([shade, shade - 20, shade - 40])
                }
            } else {
                let t = (y * 255 / horizon.max(1)) as u8;
                Rgb([90 + t / 3, 140 + t / 4, 220])
            }
        } else {
            let g = 70 + ((x / 6 + y) % 3) as u8 * 10;
            Rgb([g, g, g + 5])
        }
    })
}

fn sea_scene(w: u32, h: u32, tint: u8) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        if y < h / 2 {
            Rgb([150, 190, 235])
        } else {
            let wave = ((x / 3 + y * 2) % 7) as u8 * 6;
            Rgb([20, 60 + tint + wave, 120 + wave])
        }
    })
}

fn forest_scene(w: u32) -> RgbImage {
    let h = w / 2;
    RgbImage::from_fn(w, h, |x, y| {
        let tree = (x % 12) < 5 && y > h / 4 + (x * 7 % 9);
        if tree {
            Rgb([20, 90 + (y % 20) as u8, 30])
        } else if y < h / 2 {
            Rgb([170, 200, 230])
        } else {
            Rgb([60, 110, 40])
        }
    })
}

fn artwork_image(i: usize) -> RgbImage {
    let seed = (i as u32).wrapping_mul(2_654_435_761);
    RgbImage::from_fn(24, 32, |x, y| Rgb([(seed >> 8) as u8 ^ (x * 9) as u8, (seed >> 16) as u8 ^ (y * 7) as u8, (seed >> 24) as u8]))
}

/// Writes `catalog.csv`, `embeddings.emb`, `streetview/`, `fallbacks/`,
/// `artworks/` and `truth.json` (indoor ground truth) under `out`.
pub fn write_fixture(spec: &SynthSpec, out: &Path, pano_width: u32) -> std::io::Result<SynthCollection> {
    let col = synth_collection(spec);
    let err = |e: ncity_core::catalog::CatalogError| std::io::Error::other(e.to_string());
    let mut csv = Vec::new();
    write_catalog(&col.catalog, &mut csv).map_err(err)?;
    write_atomic(&out.join("catalog.csv"), &csv)?;
    write_atomic(&out.join("embeddings.emb"), &encode_embeddings(&col.catalog.embeddings, spec.dim).map_err(err)?)?;
    write_atomic(&out.join("truth.json"), &serde_json::to_vec_pretty(&col.hidden)?)?;

    let sv = out.join("streetview");
    for v in 0..PANO_VARIANTS {
        write_atomic(&sv.join(format!("street_{v}.png")), &encode_png(&street_scene(v, pano_width)))?;
    }
    let sea_lat = spec.origin.lat + spec.box_deg * spec.sea_fraction;
    let mut panoramas = Vec::new();
    let (rows, cols) = ((spec.box_deg / GRID_LAT).round() as usize, (spec.box_deg / GRID_LON).round() as usize);
    for r in 0..=rows {
        let lat = spec.origin.lat + r as f64 * GRID_LAT;
        if lat < sea_lat {
            continue;
        }
        for c in 0..=cols {
            let lon = spec.origin.lon + c as f64 * GRID_LON;
            panoramas.push(json!({ "lat": lat, "lon": lon, "file": format!("street_{}.png", (r + c) % PANO_VARIANTS) }));
        }
    }
    write_atomic(&sv.join("manifest.json"), &serde_json::to_vec(&json!({ "panoramas": panoramas }))?)?;

    let fb = out.join("fallbacks");
    write_atomic(&fb.join("sea/calm.png"), &encode_png(&sea_scene(pano_width, pano_width / 2, 0)))?;
    // 19:6, the aspect of the original stock photos; cropped to 2:1 on use
    write_atomic(&fb.join("sea/wide.png"), &encode_png(&sea_scene(pano_width * 19 / 12, pano_width / 2, 30)))?;
    write_atomic(&fb.join("forest/pines.png"), &encode_png(&forest_scene(pano_width)))?;
    let (lo, hi) = (spec.origin.lon - 1.0, spec.origin.lon + spec.box_deg + 1.0);
    let water = json!({ "water": [[[lo, spec.origin.lat - 1.0], [hi, spec.origin.lat - 1.0], [hi, sea_lat], [lo, sea_lat]]] });
    write_atomic(&fb.join("water.json"), &serde_json::to_vec_pretty(&water)?)?;

    for (i, id) in col.catalog.records.keys().enumerate() {
        write_atomic(&out.join("artworks").join(format!("{id}.png")), &encode_png(&artwork_image(i)))?;
    }
    Ok(col)
}
