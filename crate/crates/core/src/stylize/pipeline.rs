//! Per-artwork stage chain over a run directory:
//! `<run>/<id>/{pano.png, depth.png, art.png, art_up.png, entry.json}` plus
//! `<run>/manifest.jsonl`. Completed stages are found on disk and skipped.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    estimate_depth, generate_art_panorama, seam_discontinuity, upscale, DepthBackend, DepthMap, GenerationBackend, GenerationRequest,
    Stage, StylizeError, StylizeOptions, UpscaleBackend,
};
use crate::geo::{GeoCoordinate, Method};
use crate::panorama::{validate_equirectangular, EquirectCheck, Panorama, PanoramaSource};
use crate::raster::{decode_rgb, encode_png, write_atomic};
use crate::seed::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
const ENTRY_FILE: &str = "entry.json";

#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub depth: &'a dyn DepthBackend,
    pub generate: &'a dyn GenerationBackend,
    pub upscale: &'a dyn UpscaleBackend,
}

impl Backends<'_> {
    fn ids(&self) -> BackendIds {
        BackendIds { depth: self.depth.id().to_owned(), generate: self.generate.id().to_owned(), upscale: self.upscale.id().to_owned() }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineJob {
    pub artwork_id: String,
    pub prompt: String,
    /// The fictional (or true, for public works) coordinate used for mapping.
    pub coordinate: GeoCoordinate,
    pub method: Option<Method>,
    pub neighbors: Vec<String>,
    pub panorama: Panorama,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendIds {
    pub depth: String,
    pub generate: String,
    pub upscale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asset {
    /// Relative to the run directory.
    pub file: String,
    pub sha256: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoramaInfo {
    pub source: PanoramaSource,
    pub anchor: GeoCoordinate,
    pub radius_used: f64,
    pub equirect: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub artwork_id: String,
    pub coordinate: GeoCoordinate,
    pub method: Option<Method>,
    pub neighbors: Vec<String>,
    pub panorama: PanoramaInfo,
    pub seed: u64,
    pub steps: u32,
    pub tiling: bool,
    pub seam_tolerance: f64,
    pub seam_pre_upscale: f64,
    pub seam_post_upscale: f64,
    pub backends: BackendIds,
    pub config_digest: String,
    pub stages: BTreeMap<Stage, StageStatus>,
    pub assets: BTreeMap<String, Asset>,
}

impl ManifestEntry {
    pub fn asset(&self, name: &str) -> Option<&Asset> {
        self.assets.get(name)
    }
}

fn config_digest(opts: &StylizeOptions, ids: &BackendIds) -> String {
    let json = serde_json::to_vec(&(opts, ids)).expect("options serialize");
    sha256_hex(&json)
}

fn tag(stage: Stage, id: &str) -> impl Fn(StylizeError) -> StylizeError + '_ {
    move |e| StylizeError::Stage { stage, artwork_id: id.to_owned(), source: Box::new(e) }
}

fn store(dir: &Path, id: &str, name: &str, bytes: &[u8], dims: (u32, u32)) -> Result<Asset, std::io::Error> {
    let path = dir.join(name);
    if !path.exists() {
        write_atomic(&path, bytes)?;
    }
    Ok(Asset { file: format!("{id}/{name}"), sha256: sha256_hex(bytes), width: dims.0, height: dims.1 })
}

fn read_existing(path: &Path) -> Result<Option<Vec<u8>>, StylizeError> {
    match std::fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn completed_entry(run_dir: &Path, dir: &Path, digest: &str) -> Result<Option<ManifestEntry>, StylizeError> {
    let Some(bytes) = read_existing(&dir.join(ENTRY_FILE))? else {
        return Ok(None);
    };
    let entry: ManifestEntry =
        serde_json::from_slice(&bytes).map_err(|e| StylizeError::Format { what: "entry.json", reason: e.to_string() })?;
    if entry.config_digest != digest {
        return Err(StylizeError::InvalidRequest(format!(
            "{} was produced with a different configuration ({} != {digest})",
            dir.display(),
            entry.config_digest
        )));
    }
    if entry.assets.values().all(|a| run_dir.join(&a.file).exists()) {
        Ok(Some(entry))
    } else {
        Ok(None)
    }
}

/// Depth, generation and upscale for one artwork. Stages whose outputs are
/// already on disk are loaded instead of recomputed, so a rerun over a
/// completed entry makes no backend calls.
pub fn run_pipeline(
    run_dir: &Path,
    job: &PipelineJob,
    backends: Backends<'_>,
    opts: &StylizeOptions,
) -> Result<ManifestEntry, StylizeError> {
    let id = job.artwork_id.as_str();
    crate::catalog::validate_id(id).map_err(|e| StylizeError::InvalidRequest(e.to_string()))?;
    let ids = backends.ids();
    let digest = config_digest(opts, &ids);
    let dir = run_dir.join(id);
    if let Some(entry) = completed_entry(run_dir, &dir, &digest).map_err(tag(Stage::Record, id))? {
        return Ok(entry);
    }
    std::fs::create_dir_all(&dir).map_err(|e| tag(Stage::Record, id)(e.into()))?;
    let mut stages = BTreeMap::new();

    let check = validate_equirectangular(&job.panorama);
    let report = check.report();
    let pano = match check {
        EquirectCheck::Ok => job.panorama.pixels.clone(),
        EquirectCheck::Cropped { panorama, .. } => panorama.pixels,
        EquirectCheck::Violation { .. } => {
            return Err(tag(Stage::Panorama, id)(StylizeError::Format { what: "panorama", reason: report }));
        }
    };
    let pano_asset = store(&dir, id, "pano.png", &encode_png(&pano), pano.dimensions()).map_err(|e| tag(Stage::Panorama, id)(e.into()))?;
    stages.insert(Stage::Panorama, StageStatus::Done);

    let depth_stage = || -> Result<(DepthMap, Asset), StylizeError> {
        let depth = match read_existing(&dir.join("depth.png"))? {
            Some(bytes) => DepthMap::from_png(&bytes)?,
            None => estimate_depth(&pano, backends.depth)?,
        };
        if depth.dimensions() != pano.dimensions() {
            return Err(StylizeError::DimMismatch { expected: pano.dimensions(), found: depth.dimensions() });
        }
        let asset = store(&dir, id, "depth.png", &depth.to_png(), depth.dimensions())?;
        Ok((depth, asset))
    };
    let (depth, depth_asset) = depth_stage().map_err(tag(Stage::Depth, id))?;
    stages.insert(Stage::Depth, StageStatus::Done);

    let generate_stage = || -> Result<RgbImage, StylizeError> {
        let art = match read_existing(&dir.join("art.png"))? {
            Some(bytes) => decode_rgb(&bytes)?,
            None => {
                let mut req = GenerationRequest::new(job.prompt.clone(), depth.clone(), job.seed);
                req.steps = opts.steps;
                req.tiling = opts.tiling;
                generate_art_panorama(&req, id, job.coordinate, backends.generate, opts.seam_tolerance)?.pixels
            }
        };
        if art.dimensions() != depth.dimensions() {
            return Err(StylizeError::DimMismatch { expected: depth.dimensions(), found: art.dimensions() });
        }
        Ok(art)
    };
    let art = generate_stage().map_err(tag(Stage::Generate, id))?;
    let seam_pre = seam_discontinuity(&art);
    let art_asset = store(&dir, id, "art.png", &encode_png(&art), art.dimensions()).map_err(|e| tag(Stage::Generate, id)(e.into()))?;
    stages.insert(Stage::Generate, StageStatus::Done);

    let upscale_stage = || -> Result<RgbImage, StylizeError> {
        let expected = (art.width() * opts.upscale_factor, art.height() * opts.upscale_factor);
        let up = match read_existing(&dir.join("art_up.png"))? {
            Some(bytes) => decode_rgb(&bytes)?,
            None => upscale(&art, opts.upscale_factor, backends.upscale)?,
        };
        if up.dimensions() != expected {
            return Err(StylizeError::DimMismatch { expected, found: up.dimensions() });
        }
        let found = seam_discontinuity(&up);
        if opts.tiling && found > opts.seam_tolerance {
            return Err(StylizeError::SeamViolation { found, tolerance: opts.seam_tolerance });
        }
        Ok(up)
    };
    let up = upscale_stage().map_err(tag(Stage::Upscale, id))?;
    let seam_post = seam_discontinuity(&up);
    let up_asset = store(&dir, id, "art_up.png", &encode_png(&up), up.dimensions()).map_err(|e| tag(Stage::Upscale, id)(e.into()))?;
    stages.insert(Stage::Upscale, StageStatus::Done);
    stages.insert(Stage::Record, StageStatus::Done);

    let entry = ManifestEntry {
        artwork_id: id.to_owned(),
        coordinate: job.coordinate,
        method: job.method,
        neighbors: job.neighbors.clone(),
        panorama: PanoramaInfo {
            source: job.panorama.source,
            anchor: job.panorama.anchor,
            radius_used: job.panorama.radius_used,
            equirect: report,
        },
        seed: job.seed,
        steps: opts.steps,
        tiling: opts.tiling,
        seam_tolerance: opts.seam_tolerance,
        seam_pre_upscale: seam_pre,
        seam_post_upscale: seam_post,
        backends: ids,
        config_digest: digest,
        stages,
        assets: BTreeMap::from([
            ("pano".to_owned(), pano_asset),
            ("depth".to_owned(), depth_asset),
            ("art".to_owned(), art_asset),
            ("art_up".to_owned(), up_asset),
        ]),
    };
    let json = serde_json::to_vec_pretty(&entry).expect("entry serializes");
    write_atomic(&dir.join(ENTRY_FILE), &json).map_err(|e| tag(Stage::Record, id)(e.into()))?;
    Ok(entry)
}

/// Runs every job on a pool of `workers` threads, then appends the entries
/// to the manifest in job order.
pub fn run_batch(
    run_dir: &Path,
    jobs: &[PipelineJob],
    backends: Backends<'_>,
    opts: &StylizeOptions,
    workers: usize,
) -> Result<Vec<ManifestEntry>, StylizeError> {
    let mut seen = HashSet::new();
    if let Some(dup) = jobs.iter().find(|j| !seen.insert(j.artwork_id.as_str())) {
        return Err(StylizeError::InvalidRequest(format!("artwork {} appears twice in the batch", dup.artwork_id)));
    }
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().map_err(|e| StylizeError::InvalidRequest(e.to_string()))?;
    let entries = pool.install(|| jobs.par_iter().map(|j| run_pipeline(run_dir, j, backends, opts)).collect::<Result<Vec<_>, _>>())?;
    append_manifest(&run_dir.join(MANIFEST_FILE), &entries)?;
    Ok(entries)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, StylizeError> {
    match read_existing(path)? {
        Some(bytes) => parse_manifest(&bytes),
        None => Ok(Vec::new()),
    }
}

/// One JSON entry per non-blank line.
pub fn parse_manifest(bytes: &[u8]) -> Result<Vec<ManifestEntry>, StylizeError> {
    let text = std::str::from_utf8(bytes).map_err(|e| StylizeError::Format { what: "manifest", reason: e.to_string() })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StylizeError::Format { what: "manifest", reason: format!("line {}: {e}", i + 1) })
        })
        .collect()
}

/// Append entries whose artwork is not yet listed; existing lines are never rewritten.
pub fn append_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<usize, StylizeError> {
    let present: HashSet<String> = read_manifest(path)?.into_iter().map(|e| e.artwork_id).collect();
    let mut buf = Vec::new();
    let mut added = 0;
    for e in entries.iter().filter(|e| !present.contains(&e.artwork_id)) {
        serde_json::to_writer(&mut buf, e).expect("entry serializes");
        buf.push(b'\n');
        added += 1;
    }
    if added > 0 {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        f.write_all(&buf)?;
        f.sync_data()?;
    }
    Ok(added)
}

pub fn manifest_digest(path: &Path) -> Result<String, StylizeError> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
