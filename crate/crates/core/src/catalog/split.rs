use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ArtworkKind, Catalog, CatalogError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.7, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub validation: Vec<String>,
}

/// Seeded uniform shuffle of the public ids, cut at `round(fraction * n)`.
/// The cut is clamped so both sides keep at least one id.
pub fn split_public(catalog: &Catalog, spec: SplitSpec) -> Result<Split, CatalogError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(CatalogError::BadFraction(spec.train_fraction));
    }
    let mut ids = catalog.ids_of(ArtworkKind::Public);
    let n = ids.len();
    if n < 2 {
        return Err(CatalogError::TooFewPublic(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    ids.shuffle(&mut rng);
    let n_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let validation = ids.split_off(n_train);
    Ok(Split { train: ids, validation })
}
