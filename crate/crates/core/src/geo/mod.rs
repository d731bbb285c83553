//! Fictional coordinates for unlocated artworks.
//!
//! Two families of predictors share this module: similarity triangulation
//! over a Ball Tree of located embeddings, and a Random Forest regression
//! baseline with randomized hyperparameter search. Distances and errors are
//! planar, in raw degree units.

mod balltree;
mod coord;
mod eval;
mod forest;
mod locate;
mod scaler;
mod triangulate;
mod tuning;

use thiserror::Error;

pub use balltree::{euclidean, BallTree, NeighborSet, DEFAULT_LEAF_SIZE};
pub use coord::GeoCoordinate;
pub use eval::{dispersion, evaluate_predictions, PredictionErrors, ERROR_REDUCTION};
pub use forest::{fit_forest, predict_forest, FeatureMatrix, ForestConfig, MaxFeatures, RandomForest, RegressionTree, Target};
pub use locate::{
    assign_fictional_coordinates, read_predictions, write_predictions, LocateOptions, LocationPrediction, Method, NEIGHBORS,
    PREDICTION_COLUMNS,
};
pub use scaler::{standardize, Standardizer};
pub use triangulate::{softmax_complement_weights, triangulate_centroid, triangulate_weighted, TriangulationWeights, WeightMode};
pub use tuning::{kfold_indices, randomized_search, ParamSpace, TuningReport, TuningRow};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("coordinate out of range: ({lat}, {lon})")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("k = {k} exceeds the {n} indexed points")]
    KTooLarge { k: usize, n: usize },
    #[error("distances must be finite and non-negative")]
    NonFiniteDistance,
    #[error("non-finite value in features or targets")]
    NonFiniteInput,
    #[error("need at least {needed} located public artworks, found {found}")]
    TooFewPublic { needed: usize, found: usize },
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no coordinate for `{0}`")]
    MissingCoordinate(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
