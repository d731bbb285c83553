//! Layout of a run directory and the small JSON records stages leave in it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ncity_core::catalog::{decode_embeddings, parse_catalog, peek_dim, Catalog};
use ncity_core::geo::{read_predictions, GeoCoordinate, LocationPrediction, Method};
use ncity_core::panorama::PanoramaSource;
use ncity_core::raster::write_atomic;
use ncity_core::seed::sha256_hex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, StageExt};

#[derive(Debug, Clone)]
pub struct RunDir(PathBuf);

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self(root.into())
    }

    pub fn root(&self) -> &Path {
        &self.0
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn catalog(&self) -> PathBuf {
        self.path("catalog.csv")
    }

    pub fn embeddings(&self) -> PathBuf {
        self.path("embeddings.emb")
    }

    pub fn predictions(&self) -> PathBuf {
        self.path("predictions.csv")
    }

    pub fn fetch_dir(&self) -> PathBuf {
        self.path("fetch")
    }

    pub fn fetch_record(&self, id: &str) -> PathBuf {
        self.fetch_dir().join(format!("{id}.json"))
    }

    pub fn fetch_image(&self, id: &str) -> PathBuf {
        self.fetch_dir().join(format!("{id}.png"))
    }

    pub fn manifest(&self) -> PathBuf {
        self.path(ncity_core::stylize::MANIFEST_FILE)
    }

    pub fn load_catalog(&self, stage: &'static str) -> Result<Catalog, CliError> {
        let csv = std::fs::read(self.catalog())
            .map_err(|e| CliError::stage(stage, format!("no ingested catalog in {} ({e}); run `ingest` first", self.0.display())))?;
        let catalog = parse_catalog(csv.as_slice()).stage(stage)?;
        let bytes = std::fs::read(self.embeddings()).stage(stage)?;
        let dim = peek_dim(&bytes).stage(stage)?;
        catalog.with_embeddings(decode_embeddings(&bytes, dim).stage(stage)?).stage(stage)
    }

    pub fn load_predictions(&self, stage: &'static str) -> Result<Vec<LocationPrediction>, CliError> {
        let f = std::fs::File::open(self.predictions())
            .map_err(|e| CliError::stage(stage, format!("no predictions ({e}); run `locate` first")))?;
        read_predictions(f).stage(stage)
    }

    pub fn read_json<T: DeserializeOwned>(&self, path: &Path, stage: &'static str) -> Result<Option<T>, CliError> {
        match std::fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| CliError::stage(stage, format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CliError::stage(stage, format!("{}: {e}", path.display()))),
        }
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T, stage: &'static str) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).stage(stage)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes).stage(stage)
    }

    /// Record the seed and option digest a stage ran with in `run.json`.
    pub fn record_stage<T: Serialize>(
        &self,
        run_id: &str,
        root_seed: u64,
        stage: &'static str,
        seed: u64,
        options: &T,
    ) -> Result<(), CliError> {
        let path = self.path("run.json");
        let mut run: RunRecord = self.read_json(&path, stage)?.unwrap_or_default();
        run.run_id = run_id.to_owned();
        run.root_seed = root_seed;
        let digest = sha256_hex(&serde_json::to_vec(options).stage(stage)?);
        run.stages.insert(stage.to_owned(), StageRecord { seed, config_digest: digest });
        self.write_json(&path, &run, stage)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub root_seed: u64,
    pub stages: BTreeMap<String, StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seed: u64,
    pub config_digest: String,
}

/// Per-artwork result of `fetch`, stored as `fetch/<id>.json` next to the PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchRecord {
    pub artwork_id: String,
    pub coordinate: GeoCoordinate,
    pub method: Option<Method>,
    pub neighbors: Vec<String>,
    pub source: PanoramaSource,
    pub anchor: GeoCoordinate,
    pub radius_used: f64,
    pub fallback_asset: Option<String>,
    pub width: u32,
    pub height: u32,
}

/// `fetch.json`: the ordered target list plus source counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FetchSummary {
    pub artworks: Vec<String>,
    pub street_view: usize,
    pub fallback_sea: usize,
    pub fallback_forest: usize,
    pub fallback_fraction: f64,
}
