//! Randomized hyperparameter search with k-fold cross-validation for the forest baseline.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::evaluate_predictions;
use super::forest::{fit_forest, predict_forest, FeatureMatrix, ForestConfig, MaxFeatures, Target};
use super::scaler::Standardizer;
use super::{GeoCoordinate, GeoError};

/// Candidate values per hyperparameter. Each sampled setting draws every
/// parameter independently and uniformly from its list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub max_features: Vec<MaxFeatures>,
    pub min_samples_split: Vec<usize>,
    pub min_impurity_decrease: Vec<f64>,
    pub bootstrap: Vec<bool>,
}

impl Default for ParamSpace {
    /// The forest grid used for the published baseline (squared error only).
    fn default() -> Self {
        Self {
            n_estimators: vec![200, 400, 600, 800, 1000, 1500],
            max_depth: [5, 10, 15, 40, 50, 55].into_iter().map(Some).collect(),
            max_features: vec![MaxFeatures::All, MaxFeatures::Sqrt, MaxFeatures::Log2],
            min_samples_split: vec![2, 5, 6, 7, 9, 10],
            min_impurity_decrease: vec![0.01, 0.05, 0.1],
            bootstrap: vec![true, false],
        }
    }
}

impl ParamSpace {
    pub fn single(config: &ForestConfig) -> Self {
        Self {
            n_estimators: vec![config.n_estimators],
            max_depth: vec![config.max_depth],
            max_features: vec![config.max_features],
            min_samples_split: vec![config.min_samples_split],
            min_impurity_decrease: vec![config.min_impurity_decrease],
            bootstrap: vec![config.bootstrap],
        }
    }

    fn is_empty(&self) -> bool {
        self.n_estimators.is_empty()
            || self.max_depth.is_empty()
            || self.max_features.is_empty()
            || self.min_samples_split.is_empty()
            || self.min_impurity_decrease.is_empty()
            || self.bootstrap.is_empty()
    }

    fn sample(&self, rng: &mut impl Rng, seed: u64) -> ForestConfig {
        fn pick<T: Clone>(rng: &mut impl Rng, v: &[T]) -> T {
            v[rng.random_range(0..v.len())].clone()
        }
        ForestConfig {
            n_estimators: pick(rng, &self.n_estimators),
            max_depth: pick(rng, &self.max_depth),
            max_features: pick(rng, &self.max_features),
            min_samples_split: pick(rng, &self.min_samples_split),
            min_impurity_decrease: pick(rng, &self.min_impurity_decrease),
            bootstrap: pick(rng, &self.bootstrap),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRow {
    pub config: ForestConfig,
    pub fold_mae: Vec<f64>,
    pub mean_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub rows: Vec<TuningRow>,
    pub best: usize,
    pub fits: usize,
}

impl TuningReport {
    pub fn best_config(&self) -> &ForestConfig {
        &self.rows[self.best].config
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GeoError> {
        let folds = self.rows.first().map_or(0, |r| r.fold_mae.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> =
            ["setting", "n_estimators", "max_depth", "max_features", "min_samples_split", "min_impurity_decrease", "bootstrap"]
                .into_iter()
                .map(String::from)
                .collect();
        header.extend((0..folds).map(|f| format!("fold{f}_mae")));
        header.push("mean_mae".into());
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let c = &row.config;
            let mut rec = vec![
                i.to_string(),
                c.n_estimators.to_string(),
                c.max_depth.map_or_else(|| "none".into(), |d| d.to_string()),
                c.max_features.as_str().into(),
                c.min_samples_split.to_string(),
                c.min_impurity_decrease.to_string(),
                c.bootstrap.to_string(),
            ];
            rec.extend(row.fold_mae.iter().map(f64::to_string));
            rec.push(row.mean_mae.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Contiguous folds over a seeded shuffle; sizes differ by at most one.
pub fn kfold_indices(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = n / folds + usize::from(f < n % folds);
        out.push(idx[start..start + size].to_vec());
        start += size;
    }
    out
}

pub fn randomized_search(
    x: &FeatureMatrix,
    y: &[Target],
    space: &ParamSpace,
    n_settings: usize,
    folds: usize,
    seed: u64,
) -> Result<TuningReport, GeoError> {
    if space.is_empty() || n_settings == 0 {
        return Err(GeoError::InvalidConfig("empty parameter space".into()));
    }
    if x.rows() != y.len() {
        return Err(GeoError::LengthMismatch { left: x.rows(), right: y.len() });
    }
    if folds < 2 || x.rows() < folds * 2 {
        return Err(GeoError::TooFewSamples { needed: folds.max(2) * 2, found: x.rows() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs: Vec<ForestConfig> = (0..n_settings).map(|_| space.sample(&mut rng, seed)).collect();
    let fold_sets = kfold_indices(x.rows(), folds, seed ^ 0x5eed_f01d);

    let mut rows = Vec::with_capacity(n_settings);
    let mut fits = 0;
    for config in configs {
        let mut fold_mae = Vec::with_capacity(folds);
        for held in &fold_sets {
            let mut is_held = vec![false; x.rows()];
            held.iter().for_each(|&i| is_held[i] = true);
            let train: Vec<usize> = (0..x.rows()).filter(|&i| !is_held[i]).collect();
            let xt = x.select_rows(&train);
            let xv = x.select_rows(held);
            let scaler = Standardizer::fit(&xt)?;
            let yt: Vec<Target> = train.iter().map(|&i| y[i]).collect();
            let model = fit_forest(&scaler.transform(&xt)?, &yt, &config)?;
            fits += 1;
            let pred = predict_forest(&model, &scaler.transform(&xv)?)?;
            let to_coord = |t: &Target| GeoCoordinate { lat: t[0], lon: t[1] };
            let pred: Vec<_> = pred.iter().map(to_coord).collect();
            let truth: Vec<_> = held.iter().map(|&i| to_coord(&y[i])).collect();
            fold_mae.push(evaluate_predictions(&pred, &truth)?.mae);
        }
        let mean_mae = fold_mae.iter().sum::<f64>() / folds as f64;
        rows.push(TuningRow { config, fold_mae, mean_mae });
    }
    let best = rows.iter().enumerate().fold(0, |best, (i, r)| if r.mean_mae < rows[best].mean_mae { i } else { best });
    Ok(TuningReport { rows, best, fits })
}
