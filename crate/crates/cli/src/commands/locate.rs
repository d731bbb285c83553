use std::collections::HashMap;

use ncity_core::catalog::{split_public, ArtworkKind, Catalog, EmbeddingMap, Split, SplitSpec};
use ncity_core::geo::{
    assign_fictional_coordinates, dispersion, evaluate_predictions, randomized_search, write_predictions, FeatureMatrix, ForestConfig,
    GeoCoordinate, LocateOptions, Method, ParamSpace, Target, WeightMode, DEFAULT_LEAF_SIZE, ERROR_REDUCTION,
};
use ncity_core::raster::write_atomic;
use ncity_core::seed::{derive_seed, sha256_hex};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{CliError, LocateArgs, RunDir, Settings, StageExt, TuneArgs};

const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

fn parse_flag<T: std::str::FromStr<Err = String>>(v: Option<&str>) -> Result<Option<T>, CliError> {
    v.map(str::parse).transpose().map_err(CliError::Usage)
}

fn split(s: &Settings, catalog: &Catalog, fraction: f64, stage: &'static str) -> Result<(Split, u64), CliError> {
    let seed = derive_seed(s.seed, "split");
    Ok((split_public(catalog, SplitSpec { train_fraction: fraction, seed }).stage(stage)?, seed))
}

fn subset(catalog: &Catalog, ids: &[String]) -> EmbeddingMap {
    ids.iter().map(|id| (id.clone(), catalog.embeddings[id].clone())).collect()
}

fn public_coords(catalog: &Catalog) -> HashMap<String, GeoCoordinate> {
    catalog.records.values().filter_map(|r| r.coordinate.map(|c| (r.id.clone(), c))).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TuningSummary {
    config_digest: String,
    n_settings: usize,
    folds: usize,
    fits: usize,
    best_index: usize,
    best_mean_mae: f64,
    best: ForestConfig,
}

pub fn locate(s: &Settings, run: &RunDir, a: &LocateArgs) -> Result<(), CliError> {
    const STAGE: &str = "locate";
    let method: Method = s.pick(parse_flag(a.method.as_deref())?, "method", None)?.unwrap_or(Method::Similar);
    let mode: WeightMode = s.pick(parse_flag(a.mode.as_deref())?, "mode", None)?.unwrap_or_default();
    let fraction = s.pick(a.train_fraction, "train_fraction", None)?.unwrap_or(DEFAULT_TRAIN_FRACTION);
    let leaf_size = s.pick(a.leaf_size, "leaf_size", None)?.unwrap_or(DEFAULT_LEAF_SIZE);
    let forest = if s.switch(a.use_tuned, "use_tuned")? {
        let t: TuningSummary = run
            .read_json(&run.path("tuning.json"), STAGE)?
            .ok_or_else(|| CliError::stage(STAGE, "--use-tuned needs tuning.json; run `tune` first"))?;
        t.best
    } else {
        ForestConfig { seed: derive_seed(s.seed, "locate/forest"), ..ForestConfig::default() }
    };
    let opts = LocateOptions { method, mode, leaf_size, forest };

    let catalog = run.load_catalog(STAGE)?;
    let (split, split_seed) = split(s, &catalog, fraction, STAGE)?;
    let indoor = catalog.ids_of(ArtworkKind::Indoor);
    if s.dry_run {
        println!(
            "would locate {} indoor artworks with {} from {} training artworks ({} held out for validation)",
            indoor.len(),
            method.as_str(),
            split.train.len(),
            split.validation.len()
        );
        return Ok(());
    }
    let coords = public_coords(&catalog);
    let located = subset(&catalog, &split.train);

    let val = assign_fictional_coordinates(&subset(&catalog, &split.validation), &located, &coords, &opts).stage(STAGE)?;
    let val_pred: Vec<GeoCoordinate> = val.iter().map(|p| p.coordinate).collect();
    let val_truth: Vec<GeoCoordinate> = split.validation.iter().map(|id| coords[id]).collect();
    let errors = evaluate_predictions(&val_pred, &val_truth).stage(STAGE)?;
    let n = split.train.len() as f64;
    let centroid = GeoCoordinate {
        lat: split.train.iter().map(|id| coords[id].lat).sum::<f64>() / n,
        lon: split.train.iter().map(|id| coords[id].lon).sum::<f64>() / n,
    };
    let baseline = evaluate_predictions(&vec![centroid; val_truth.len()], &val_truth).stage(STAGE)?;

    let preds = assign_fictional_coordinates(&subset(&catalog, &indoor), &located, &coords, &opts).stage(STAGE)?;
    let indoor_points: Vec<GeoCoordinate> = preds.iter().map(|p| p.coordinate).collect();
    let indoor_dispersion = if indoor_points.is_empty() { None } else { Some(dispersion(&indoor_points).stage(STAGE)?) };

    let report = json!({
        "method": method.as_str(),
        "mode": (method == Method::SimilarWeighted).then_some(mode),
        "leaf_size": leaf_size,
        "forest": (method == Method::Forest).then_some(&opts.forest),
        "train_fraction": fraction,
        "split_seed": split_seed,
        "train": split.train.len(),
        "validation": split.validation.len(),
        "indoor": indoor.len(),
        "validation_mae": errors.mae,
        "validation_mse": errors.mse,
        "error_reduction": ERROR_REDUCTION,
        "centroid_baseline_mae": baseline.mae,
        "validation_dispersion": dispersion(&val_pred).stage(STAGE)?,
        "indoor_dispersion": indoor_dispersion,
    });
    let mut csv = Vec::new();
    write_predictions(&preds, &mut csv).stage(STAGE)?;
    write_atomic(&run.predictions(), &csv).stage(STAGE)?;
    run.write_json(&run.path("split.json"), &split, STAGE)?;
    run.write_json(&run.path(&format!("locate_{}.json", method.as_str())), &report, STAGE)?;
    run.record_stage(&s.run_id, s.seed, STAGE, split_seed, &report)?;
    println!(
        "{}: {} predictions; validation MAE {:.5} (centroid baseline {:.5}), MSE {:.6}, dispersion {:.5}",
        method.as_str(),
        preds.len(),
        errors.mae,
        baseline.mae,
        errors.mse,
        report["validation_dispersion"].as_f64().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn tune(s: &Settings, run: &RunDir, a: &TuneArgs) -> Result<(), CliError> {
    const STAGE: &str = "tune";
    let n_settings = s.pick(a.n_settings, "n_settings", None)?.unwrap_or(10);
    let folds = s.pick(a.folds, "folds", None)?.unwrap_or(3);
    let fraction = s.pick(a.train_fraction, "train_fraction", None)?.unwrap_or(DEFAULT_TRAIN_FRACTION);
    let seed = derive_seed(s.seed, "tune");
    let catalog = run.load_catalog(STAGE)?;
    let (split, split_seed) = split(s, &catalog, fraction, STAGE)?;
    let space = ParamSpace::default();
    let digest = sha256_hex(&serde_json::to_vec(&(&space, n_settings, folds, seed, split_seed, &split.train)).stage(STAGE)?);
    if let Some(prev) = run.read_json::<TuningSummary>(&run.path("tuning.json"), STAGE)? {
        if prev.config_digest == digest && run.path("tuning.csv").exists() {
            println!("tune: up to date (best mean MAE {:.5}, setting {})", prev.best_mean_mae, prev.best_index);
            return Ok(());
        }
    }
    if s.dry_run {
        println!(
            "would fit {} forests ({n_settings} settings x {folds} folds) on {} training artworks",
            n_settings * folds,
            split.train.len()
        );
        return Ok(());
    }
    let coords = public_coords(&catalog);
    let rows: Vec<Vec<f64>> =
        split.train.iter().map(|id| catalog.embeddings[id].values().iter().map(|&v| f64::from(v)).collect()).collect();
    let x = FeatureMatrix::from_rows(&rows).stage(STAGE)?;
    let y: Vec<Target> = split.train.iter().map(|id| [coords[id].lat, coords[id].lon]).collect();
    let report = randomized_search(&x, &y, &space, n_settings, folds, seed).stage(STAGE)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).stage(STAGE)?;
    write_atomic(&run.path("tuning.csv"), &csv).stage(STAGE)?;
    let summary = TuningSummary {
        config_digest: digest,
        n_settings,
        folds,
        fits: report.fits,
        best_index: report.best,
        best_mean_mae: report.rows[report.best].mean_mae,
        best: report.best_config().clone(),
    };
    run.write_json(&run.path("tuning.json"), &summary, STAGE)?;
    run.record_stage(&s.run_id, s.seed, STAGE, seed, &summary)?;
    println!("tune: {} fits, best setting {} with mean MAE {:.5}", report.fits, report.best, summary.best_mean_mae);
    Ok(())
}
