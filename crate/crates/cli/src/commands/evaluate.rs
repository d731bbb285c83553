use rayon::prelude::*;

use ncity_core::catalog::ArtworkKind;
use ncity_core::feed::export_map as write_map;
use ncity_core::geo::GeoCoordinate;
use ncity_core::metrics::{
    evaluate_pairs, export_survey_triplets, write_pairs_csv, write_summary_csv, MetricsError, PairInput, SurveyItem, METRIC_NAMES,
};
use ncity_core::raster::{load_rgb, write_atomic};
use ncity_core::seed::derive_seed;
use ncity_core::stylize::{read_manifest, ManifestEntry};
use serde_json::{json, Map, Value};

use super::pool;
use crate::store::FetchRecord;
use crate::{CliError, ExportMapArgs, ExportSurveyArgs, RunDir, Settings, StageExt};

fn entries(run: &RunDir, stage: &'static str) -> Result<Vec<ManifestEntry>, CliError> {
    let entries = read_manifest(&run.manifest()).stage(stage)?;
    if entries.is_empty() {
        return Err(CliError::stage(stage, "manifest is empty; run `stylize` first"));
    }
    Ok(entries)
}

fn asset_image(run: &RunDir, e: &ManifestEntry, name: &str) -> Result<image::RgbImage, MetricsError> {
    let a = e
        .asset(name)
        .ok_or_else(|| MetricsError::Format { what: "manifest entry", reason: format!("{}: no `{name}` asset", e.artwork_id) })?;
    Ok(load_rgb(&run.root().join(&a.file))?)
}

pub fn evaluate(s: &Settings, run: &RunDir) -> Result<(), CliError> {
    const STAGE: &str = "evaluate";
    let entries = entries(run, STAGE)?;
    if s.dry_run {
        println!("would score {} original/art panorama pairs", entries.len());
        return Ok(());
    }
    let report = pool(s, STAGE)?.install(|| {
        let inputs = entries
            .par_iter()
            .map(|e| {
                Ok(PairInput {
                    artwork_id: e.artwork_id.clone(),
                    original: asset_image(run, e, "pano")?,
                    art: asset_image(run, e, "art_up")?,
                })
            })
            .collect::<Result<Vec<_>, MetricsError>>()?;
        evaluate_pairs(&inputs)
    });
    let report = report.stage(STAGE)?;
    let mut pairs = Vec::new();
    write_pairs_csv(&report.pairs, &mut pairs).stage(STAGE)?;
    write_atomic(&run.path("pairs.csv"), &pairs).stage(STAGE)?;
    let mut summary = Vec::new();
    write_summary_csv(&report.summary, &mut summary).stage(STAGE)?;
    write_atomic(&run.path("summary.csv"), &summary).stage(STAGE)?;
    let table: Map<String, Value> = METRIC_NAMES.iter().zip(&report.summary).map(|(n, m)| ((*n).to_owned(), json!(m))).collect();
    let record = json!({
        "pairs": report.pairs.len(),
        "hog_degenerate": report.hog_degenerate,
        "comparison": "grayscale; art panorama bilinearly resized to the original's dimensions",
        "summary": table,
    });
    run.write_json(&run.path("evaluate.json"), &record, STAGE)?;
    run.record_stage(&s.run_id, s.seed, STAGE, 0, &record["comparison"])?;
    println!("{:<12} {:>8} {:>8} {:>8} {:>8}", "metric", "mean", "std", "min", "max");
    for (name, m) in METRIC_NAMES.iter().zip(&report.summary) {
        println!("{name:<12} {:>8.4} {:>8.4} {:>8.4} {:>8.4}", m.mean, m.std, m.min, m.max);
    }
    println!("{} pairs scored ({} with a flat HOG descriptor)", report.pairs.len(), report.hog_degenerate);
    Ok(())
}

pub fn export_map(s: &Settings, run: &RunDir, a: &ExportMapArgs) -> Result<(), CliError> {
    const STAGE: &str = "export-map";
    let catalog = run.load_catalog(STAGE)?;
    let public: Vec<GeoCoordinate> =
        catalog.records.values().filter(|r| r.kind == ArtworkKind::Public).filter_map(|r| r.coordinate).collect();
    let preds = run.load_predictions(STAGE)?;
    let predicted: Vec<GeoCoordinate> = preds.iter().map(|p| p.coordinate).collect();
    let flags = preds
        .iter()
        .map(|p| Ok(run.read_json::<FetchRecord>(&run.fetch_record(&p.artwork_id), STAGE)?.is_some_and(|r| r.source.is_fallback())))
        .collect::<Result<Vec<bool>, CliError>>()?;
    let out = a.out.clone().unwrap_or_else(|| run.path("map.svg"));
    let green = flags.iter().filter(|f| **f).count();
    if s.dry_run {
        println!(
            "would plot {} public, {} predicted and {green} fallback points to {}",
            public.len(),
            predicted.len() - green,
            out.display()
        );
        return Ok(());
    }
    write_map(&public, &predicted, &flags, &out).stage(STAGE)?;
    println!("map: {} red, {} blue, {green} green -> {}", public.len(), predicted.len() - green, out.display());
    Ok(())
}

pub fn export_survey(s: &Settings, run: &RunDir, a: &ExportSurveyArgs) -> Result<(), CliError> {
    const STAGE: &str = "export-survey";
    let entries = entries(run, STAGE)?;
    let catalog = run.load_catalog(STAGE)?;
    let artworks = s.pick(a.artworks.clone(), "artworks", None)?;
    let out = a.out.clone().unwrap_or_else(|| run.path("survey"));
    let ids: Vec<String> = entries.iter().map(|e| e.artwork_id.clone()).collect();
    if s.dry_run {
        println!("would write {} of {} montages to {}", a.n, ids.len(), out.display());
        return Ok(());
    }
    let seed = derive_seed(s.seed, "survey");
    let written = export_survey_triplets(&ids, a.n, seed, &out, |id| {
        let e = entries.iter().find(|e| e.artwork_id == id).expect("id comes from the manifest");
        let artwork = match (&artworks, catalog.records.get(id)) {
            (Some(base), Some(r)) if !r.image_ref.is_empty() => load_rgb(&base.join(&r.image_ref)).ok(),
            _ => None,
        };
        Ok(SurveyItem { artwork_id: id.to_owned(), artwork, panorama: asset_image(run, e, "pano")?, art: asset_image(run, e, "art_up")? })
    })
    .stage(STAGE)?;
    println!("wrote {} survey montages to {}", written.len(), out.display());
    Ok(())
}
