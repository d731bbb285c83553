//! `ncity`: ingest a catalog, place indoor artworks on the map, fetch and
//! stylize panoramas, score them, and serve the result as a timed feed.
//! Every stage reads and writes one run directory (`runs/<run-id>` by default).

use std::fmt::Display;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

mod commands;
pub mod settings;
pub mod store;
pub mod synth;

pub use settings::Settings;
pub use store::RunDir;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("[{stage}] {message}")]
    Stage { stage: &'static str, message: String },
}

impl CliError {
    pub fn stage(stage: &'static str, message: impl Into<String>) -> Self {
        CliError::Stage { stage, message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Stage { .. } => 1,
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T, E: Display> StageExt<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::stage(stage, e.to_string()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "ncity", version, about = "Curated-city pipeline: locate, fetch, stylize, evaluate, serve")]
pub struct Cli {
    /// Root seed; every stage derives its own seed from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// key=value config file (flags override it, it overrides NCITY_* env vars).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for fetch, stylize and evaluate.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Print the planned actions without writing anything.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Run name; the run directory is `<runs>/<run-id>` (default `runs/default`).
    #[arg(long, global = true)]
    pub run_id: Option<String>,
    /// Parent of run directories.
    #[arg(long, global = true)]
    pub runs: Option<PathBuf>,
    /// Explicit run directory (overrides --runs/--run-id).
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a catalog and its embeddings and copy them into the run directory.
    Ingest(IngestArgs),
    /// Predict coordinates for indoor artworks.
    Locate(LocateArgs),
    /// Randomized hyperparameter search for the forest baseline.
    Tune(TuneArgs),
    /// Retrieve a panorama (or fallback asset) for every located artwork.
    Fetch(FetchArgs),
    /// Depth, art generation and upscale for every fetched panorama.
    Stylize(StylizeArgs),
    /// Score art panoramas against their originals.
    Evaluate,
    /// Plot public, predicted and fallback locations as SVG.
    ExportMap(ExportMapArgs),
    /// Write artwork/panorama/art montages for a user survey.
    ExportSurvey(ExportSurveyArgs),
    /// Serve the timed-reveal feed over HTTP.
    Serve(ServeArgs),
    /// Write a synthetic collection with mock street view and fallbacks.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub catalog: PathBuf,
    /// Joint (image ++ text) embedding table.
    #[arg(long, conflicts_with_all = ["image_embeddings", "text_embeddings"])]
    pub embeddings: Option<PathBuf>,
    #[arg(long, requires = "text_embeddings")]
    pub image_embeddings: Option<PathBuf>,
    #[arg(long, requires = "image_embeddings")]
    pub text_embeddings: Option<PathBuf>,
    /// Replace a different catalog already in the run directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct LocateArgs {
    /// similar | similar-weighted | forest
    #[arg(long)]
    pub method: Option<String>,
    /// Weighted reduction: normalized | as-written
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub leaf_size: Option<usize>,
    /// Use the forest configuration chosen by `tune`.
    #[arg(long)]
    pub use_tuned: bool,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub n_settings: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// mock | google
    #[arg(long)]
    pub backend: Option<String>,
    /// Directory with manifest.json for the mock backend.
    #[arg(long)]
    pub mock_dir: Option<PathBuf>,
    /// Fallback library (sea/, forest/, optional water.json).
    #[arg(long)]
    pub fallbacks: Option<PathBuf>,
    /// Tile zoom for the google backend.
    #[arg(long)]
    pub zoom: Option<u32>,
    /// Cap on backend requests per second.
    #[arg(long)]
    pub max_rps: Option<f64>,
    /// Also fetch panoramas at the public artworks' own coordinates.
    #[arg(long)]
    pub include_public: bool,
}

#[derive(Debug, Args)]
pub struct StylizeArgs {
    /// mock | http
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub model_url: Option<String>,
    #[arg(long)]
    pub model_timeout_secs: Option<u64>,
    #[arg(long)]
    pub steps: Option<u32>,
    /// Request seamless horizontal tiling (default true).
    #[arg(long)]
    pub tiling: Option<bool>,
    #[arg(long)]
    pub seam_tolerance: Option<f64>,
    #[arg(long)]
    pub upscale: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ExportMapArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportSurveyArgs {
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base directory that catalog `image_ref` paths are relative to.
    #[arg(long)]
    pub artworks: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub interval_minutes: Option<i64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Exhibition start (RFC 3339); defaults to the persisted one, else now.
    #[arg(long)]
    pub epoch: Option<String>,
    #[arg(long)]
    pub tick_seconds: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub public: usize,
    #[arg(long, default_value_t = 300)]
    pub indoor: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = synth::DEFAULT_NOISE)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.4)]
    pub box_deg: f64,
    #[arg(long, default_value_t = 60.05)]
    pub origin_lat: f64,
    #[arg(long, default_value_t = 24.75)]
    pub origin_lon: f64,
    #[arg(long, default_value_t = 0.15)]
    pub sea_fraction: f64,
    #[arg(long, default_value_t = 128)]
    pub pano_width: u32,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let settings = Settings::resolve(settings::GlobalFlags {
        seed: cli.seed,
        config: cli.config.as_deref(),
        jobs: cli.jobs,
        dry_run: cli.dry_run,
        run_id: cli.run_id.as_deref(),
        runs: cli.runs.as_deref(),
        run_dir: cli.run_dir.as_deref(),
    })?;
    let run = RunDir::new(&settings.run_dir);
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&settings, &run, a),
        Command::Locate(a) => commands::locate(&settings, &run, a),
        Command::Tune(a) => commands::tune(&settings, &run, a),
        Command::Fetch(a) => commands::fetch(&settings, &run, a),
        Command::Stylize(a) => commands::stylize(&settings, &run, a),
        Command::Evaluate => commands::evaluate(&settings, &run),
        Command::ExportMap(a) => commands::export_map(&settings, &run, a),
        Command::ExportSurvey(a) => commands::export_survey(&settings, &run, a),
        Command::Serve(a) => commands::serve(&settings, &run, a),
        Command::Synth(a) => commands::synth(&settings, a),
    }
}
