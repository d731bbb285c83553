//! Random Forest regression with two outputs (lat, lon).
//!
//! CART trees grow on squared error. Node statistics are computed in an
//! order that depends only on the sample values, never on row order, so a
//! forest fitted without bootstrap is invariant to permuting its training
//! rows.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GeoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Log2,
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt() as usize,
            MaxFeatures::Log2 => (n_features as f64).log2() as usize,
        };
        m.clamp(1, n_features.max(1))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MaxFeatures::All => "all",
            MaxFeatures::Sqrt => "sqrt",
            MaxFeatures::Log2 => "log2",
        }
    }
}

impl std::str::FromStr for MaxFeatures {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" | "1.0" => Ok(Self::All),
            "sqrt" => Ok(Self::Sqrt),
            "log2" => Ok(Self::Log2),
            other => Err(format!("unknown max_features `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_estimators: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub min_impurity_decrease: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: MaxFeatures::All,
            min_impurity_decrease: 0.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), GeoError> {
        if self.n_estimators == 0 {
            return Err(GeoError::InvalidConfig("n_estimators must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(GeoError::InvalidConfig("min_samples_split must be >= 2".into()));
        }
        if !(self.min_impurity_decrease >= 0.0) {
            return Err(GeoError::InvalidConfig("min_impurity_decrease must be >= 0".into()));
        }
        Ok(())
    }
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, GeoError> {
        if data.len() != rows * cols {
            return Err(GeoError::DimMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, GeoError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(GeoError::DimMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }
}

pub type Target = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum TreeNode {
    Leaf { value: Target },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict_row(&self, x: &[f64]) -> Target {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
    n_features: usize,
}

impl RandomForest {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }
}

fn cmp_target(a: &Target, b: &Target) -> Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

/// Mean of targets, summed in value order as offsets from the smallest,
/// so identical values average to themselves exactly.
fn canonical_mean(values: &mut [Target]) -> Target {
    values.sort_unstable_by(cmp_target);
    offset_mean(values.iter().copied(), values.len())
}

fn offset_mean(mut values: impl Iterator<Item = Target>, n: usize) -> Target {
    let Some(base) = values.next() else {
        return [f64::NAN; 2];
    };
    let mut s = [0.0; 2];
    for v in values {
        s[0] += v[0] - base[0];
        s[1] += v[1] - base[1];
    }
    [base[0] + s[0] / n as f64, base[1] + s[1] / n as f64]
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [Target],
    config: &'a ForestConfig,
    n_total: f64,
    n_candidates: usize,
    nodes: Vec<TreeNode>,
    rng: ChaCha8Rng,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    sse: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Builder<'_> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let mut ys: Vec<Target> = samples.iter().map(|&i| self.y[i]).collect();
        let mean = canonical_mean(&mut ys);
        // ys is now in value order
        let sse_parent: f64 = ys.iter().map(|v| (v[0] - mean[0]).powi(2) + (v[1] - mean[1]).powi(2)).sum();
        let n = samples.len();
        let impurity = sse_parent / (2.0 * n as f64);

        let idx = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: mean });

        let depth_ok = self.config.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || n < self.config.min_samples_split || impurity <= f64::EPSILON * f64::EPSILON {
            return idx;
        }
        let Some(best) = self.best_split(&samples, mean) else {
            return idx;
        };
        let decrease = (sse_parent - best.sse) / (2.0 * self.n_total);
        if decrease + f64::EPSILON < self.config.min_impurity_decrease {
            return idx;
        }
        let (feature, threshold) = (best.feature, best.threshold);
        let left = self.grow(best.left, depth + 1);
        let right = self.grow(best.right, depth + 1);
        self.nodes[idx] = TreeNode::Split { feature, threshold, left, right };
        idx
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.cols();
        if self.n_candidates >= d {
            (0..d).collect()
        } else {
            sample(&mut self.rng, d, self.n_candidates).into_vec()
        }
    }

    fn best_split(&mut self, samples: &[usize], mean: Target) -> Option<BestSplit> {
        let n = samples.len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order: Vec<(f64, Target)> = Vec::with_capacity(n);
        for feature in self.candidate_features() {
            order.clear();
            order.extend(samples.iter().map(|&i| {
                let y = self.y[i];
                (self.x.at(i, feature), [y[0] - mean[0], y[1] - mean[1]])
            }));
            order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then_with(|| cmp_target(&a.1, &b.1)));
            if order[0].0 == order[n - 1].0 {
                continue;
            }
            let (mut total, mut total_sq) = ([0.0; 2], [0.0; 2]);
            for (_, y) in &order {
                for k in 0..2 {
                    total[k] += y[k];
                    total_sq[k] += y[k] * y[k];
                }
            }
            let (mut s, mut sq) = ([0.0; 2], [0.0; 2]);
            for i in 1..n {
                let y = order[i - 1].1;
                for k in 0..2 {
                    s[k] += y[k];
                    sq[k] += y[k] * y[k];
                }
                if order[i - 1].0 == order[i].0 {
                    continue;
                }
                let (nl, nr) = (i as f64, (n - i) as f64);
                let mut sse = 0.0;
                for k in 0..2 {
                    let sl = (sq[k] - s[k] * s[k] / nl).max(0.0);
                    let rs = total[k] - s[k];
                    let sr = (total_sq[k] - sq[k] - rs * rs / nr).max(0.0);
                    sse += sl + sr;
                }
                if best.is_none_or(|(_, _, b)| sse < b) {
                    let (lo, hi) = (order[i - 1].0, order[i].0);
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((feature, threshold, sse));
                }
            }
        }
        let (feature, threshold, sse) = best?;
        let (left, right): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| self.x.at(i, feature) <= threshold);
        Some(BestSplit { feature, threshold, sse, left, right })
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

pub fn fit_forest(x: &FeatureMatrix, y: &[Target], config: &ForestConfig) -> Result<RandomForest, GeoError> {
    config.validate()?;
    if x.rows() != y.len() {
        return Err(GeoError::LengthMismatch { left: x.rows(), right: y.len() });
    }
    if x.rows() < config.min_samples_split || x.rows() == 0 || x.cols() == 0 {
        return Err(GeoError::TooFewSamples { needed: config.min_samples_split, found: x.rows() });
    }
    if y.iter().flatten().any(|v| !v.is_finite()) || x.data.iter().any(|v| !v.is_finite()) {
        return Err(GeoError::NonFiniteInput);
    }
    let n = x.rows();
    let n_candidates = config.max_features.resolve(x.cols());
    let trees = (0..config.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(config.seed, t);
            let samples: Vec<usize> = if config.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            let mut b = Builder { x, y, config, n_total: n as f64, n_candidates, nodes: Vec::new(), rng };
            b.grow(samples, 0);
            RegressionTree { nodes: b.nodes }
        })
        .collect();
    Ok(RandomForest { trees, n_features: x.cols() })
}

/// Mean of the per-tree leaf values for each row.
pub fn predict_forest(model: &RandomForest, x: &FeatureMatrix) -> Result<Vec<Target>, GeoError> {
    if x.cols() != model.n_features {
        return Err(GeoError::DimMismatch { expected: model.n_features, found: x.cols() });
    }
    let n_trees = model.trees.len();
    Ok((0..x.rows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            offset_mean(model.trees.iter().map(|t| t.predict_row(row)), n_trees)
        })
        .collect())
}
