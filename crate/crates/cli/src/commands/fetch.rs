use rayon::prelude::*;

use ncity_core::catalog::ArtworkKind;
use ncity_core::geo::{GeoCoordinate, Method};
use ncity_core::panorama::{
    fetch_panorama, select_fallback, validate_equirectangular, CachedStreetView, EquirectCheck, FallbackLibrary, FetchPolicy,
    GoogleStreetView, MockStreetView, PanoramaError, PanoramaSource, RateLimited, StreetViewBackend,
};
use ncity_core::raster::{encode_png, write_atomic};
use ncity_core::seed::derive_seed;
use serde_json::json;

use super::pool;
use crate::store::{FetchRecord, FetchSummary};
use crate::{CliError, FetchArgs, RunDir, Settings, StageExt};

const STAGE: &str = "fetch";

struct Target {
    id: String,
    at: GeoCoordinate,
    method: Option<Method>,
    neighbors: Vec<String>,
}

fn targets(run: &RunDir, include_public: bool) -> Result<Vec<Target>, CliError> {
    let mut out: Vec<Target> = run
        .load_predictions(STAGE)?
        .into_iter()
        .map(|p| Target {
            id: p.artwork_id,
            at: p.coordinate,
            method: Some(p.method),
            neighbors: p.neighbors.map(|n| n.ids).unwrap_or_default(),
        })
        .collect();
    if include_public {
        let catalog = run.load_catalog(STAGE)?;
        out.extend(
            catalog
                .records
                .values()
                .filter(|r| r.kind == ArtworkKind::Public)
                .filter_map(|r| r.coordinate.map(|at| Target { id: r.id.clone(), at, method: None, neighbors: Vec::new() })),
        );
    }
    Ok(out)
}

fn backend(s: &Settings, a: &FetchArgs) -> Result<Box<dyn StreetViewBackend>, CliError> {
    let name = s.pick(a.backend.clone(), "backend", None)?.unwrap_or_else(|| "mock".into());
    let inner: Box<dyn StreetViewBackend> = match name.as_str() {
        "mock" => {
            let dir =
                s.pick(a.mock_dir.clone(), "mock_dir", None)?.ok_or_else(|| CliError::Usage("the mock backend needs --mock-dir".into()))?;
            Box::new(MockStreetView::from_dir(&dir).map_err(|e| CliError::stage(STAGE, format!("{}: {e}", dir.display())))?)
        }
        "google" => {
            let zoom = s.pick(a.zoom, "zoom", None)?.unwrap_or(2);
            Box::new(GoogleStreetView::from_env(zoom).stage(STAGE)?)
        }
        other => return Err(CliError::Usage(format!("unknown street-view backend `{other}` (mock | google)"))),
    };
    Ok(match s.pick(a.max_rps, "max_rps", None)? {
        Some(rps) => Box::new(RateLimited::new(inner, rps).map_err(|e| CliError::Usage(e.to_string()))?),
        None => inner,
    })
}

fn existing(run: &RunDir, id: &str) -> Result<Option<FetchRecord>, CliError> {
    if !run.fetch_image(id).exists() {
        return Ok(None);
    }
    run.read_json(&run.fetch_record(id), STAGE)
}

fn fetch_one(
    run: &RunDir,
    t: &Target,
    sv: &dyn StreetViewBackend,
    library: Option<&FallbackLibrary>,
    fallback_seed: u64,
) -> Result<FetchRecord, CliError> {
    if let Some(rec) = existing(run, &t.id)? {
        return Ok(rec);
    }
    let tag = |e: PanoramaError| CliError::stage(STAGE, format!("{}: {e}", t.id));
    let (pano, fallback_asset) = match fetch_panorama(t.at, &FetchPolicy::default(), sv) {
        Ok(p) => (p, None),
        Err(PanoramaError::FallbackNeeded { .. }) => {
            let lib = library
                .ok_or_else(|| CliError::stage(STAGE, format!("{}: no street view within 250 m and no --fallbacks library", t.id)))?;
            let (terrain, idx) = lib.pick(t.at, fallback_seed).map_err(tag)?;
            (select_fallback(t.at, lib, fallback_seed).map_err(tag)?, Some(lib.assets(terrain)[idx].name.clone()))
        }
        Err(e) => return Err(tag(e)),
    };
    let pixels = match validate_equirectangular(&pano) {
        EquirectCheck::Ok => pano.pixels,
        EquirectCheck::Cropped { panorama, .. } => panorama.pixels,
        v @ EquirectCheck::Violation { .. } => return Err(CliError::stage(STAGE, format!("{}: {}", t.id, v.report()))),
    };
    let rec = FetchRecord {
        artwork_id: t.id.clone(),
        coordinate: t.at,
        method: t.method,
        neighbors: t.neighbors.clone(),
        source: pano.source,
        anchor: pano.anchor,
        radius_used: pano.radius_used,
        fallback_asset,
        width: pixels.width(),
        height: pixels.height(),
    };
    write_atomic(&run.fetch_image(&t.id), &encode_png(&pixels)).stage(STAGE)?;
    run.write_json(&run.fetch_record(&t.id), &rec, STAGE)?;
    Ok(rec)
}

pub fn fetch(s: &Settings, run: &RunDir, a: &FetchArgs) -> Result<(), CliError> {
    let include_public = s.switch(a.include_public, "include_public")?;
    let targets = targets(run, include_public)?;
    if s.dry_run {
        let done = targets.iter().filter(|t| run.fetch_image(&t.id).exists() && run.fetch_record(&t.id).exists()).count();
        println!("would fetch {} panoramas ({} already present)", targets.len() - done, done);
        for t in targets.iter().filter(|t| !run.fetch_record(&t.id).exists()) {
            println!("  {} at ({:.6}, {:.6})", t.id, t.at.lat, t.at.lon);
        }
        return Ok(());
    }
    let sv = CachedStreetView::new(backend(s, a)?, run.path("cache"));
    let library = s
        .pick(a.fallbacks.clone(), "fallbacks", None)?
        .map(|dir| FallbackLibrary::load_dir(&dir).map_err(|e| CliError::stage(STAGE, format!("{}: {e}", dir.display()))))
        .transpose()?;
    let fallback_seed = derive_seed(s.seed, "fallback");
    let records = pool(s, STAGE)?
        .install(|| targets.par_iter().map(|t| fetch_one(run, t, &sv, library.as_ref(), fallback_seed)).collect::<Result<Vec<_>, _>>())?;

    let count = |src: PanoramaSource| records.iter().filter(|r| r.source == src).count();
    let mut summary = FetchSummary {
        artworks: records.iter().map(|r| r.artwork_id.clone()).collect(),
        street_view: count(PanoramaSource::StreetView),
        fallback_sea: count(PanoramaSource::FallbackSea),
        fallback_forest: count(PanoramaSource::FallbackForest),
        fallback_fraction: 0.0,
    };
    if !records.is_empty() {
        summary.fallback_fraction = (summary.fallback_sea + summary.fallback_forest) as f64 / records.len() as f64;
    }
    run.write_json(&run.path("fetch.json"), &summary, STAGE)?;
    run.record_stage(&s.run_id, s.seed, STAGE, fallback_seed, &json!({ "include_public": include_public }))?;
    println!(
        "fetched {} panoramas: {} street view, {} sea fallback, {} forest fallback ({:.1}% fallback)",
        records.len(),
        summary.street_view,
        summary.fallback_sea,
        summary.fallback_forest,
        summary.fallback_fraction * 100.0
    );
    Ok(())
}
