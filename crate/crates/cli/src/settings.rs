//! Global options resolved as flag, then config file, then environment.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ncity_core::config::{parse_key_values, KeyValues};

use crate::CliError;

/// Every key a config file may contain.
pub const CONFIG_KEYS: &[&str] = &[
    "seed",
    "jobs",
    "run_id",
    "runs",
    "run_dir",
    "method",
    "mode",
    "train_fraction",
    "leaf_size",
    "use_tuned",
    "n_settings",
    "folds",
    "backend",
    "mock_dir",
    "fallbacks",
    "zoom",
    "max_rps",
    "include_public",
    "model_backend",
    "model_url",
    "model_timeout_secs",
    "steps",
    "tiling",
    "seam_tolerance",
    "upscale",
    "artworks",
    "interval_minutes",
    "batch",
    "bind",
    "epoch",
    "tick_seconds",
];

#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub jobs: usize,
    pub dry_run: bool,
    pub run_id: String,
    pub run_dir: PathBuf,
    pub config: KeyValues,
}

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

fn parse_env<T: FromStr>(name: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    env_var(name).map(|v| v.parse::<T>().map_err(|e| CliError::Usage(format!("{name}: {e}")))).transpose()
}

pub struct GlobalFlags<'a> {
    pub seed: Option<u64>,
    pub config: Option<&'a Path>,
    pub jobs: Option<usize>,
    pub dry_run: bool,
    pub run_id: Option<&'a str>,
    pub runs: Option<&'a Path>,
    pub run_dir: Option<&'a Path>,
}

impl Settings {
    pub fn resolve(flags: GlobalFlags<'_>) -> Result<Self, CliError> {
        let config_path = flags.config.map(Path::to_path_buf).or_else(|| env_var("NCITY_CONFIG").map(PathBuf::from));
        let config = match config_path {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                let kv = parse_key_values(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                kv.expect_only(CONFIG_KEYS).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                kv
            }
            None => KeyValues::default(),
        };
        let mut s = Self { seed: 0, jobs: 1, dry_run: flags.dry_run, run_id: String::new(), run_dir: PathBuf::new(), config };
        s.seed = s.pick(flags.seed, "seed", Some("NCITY_SEED"))?.unwrap_or(0);
        s.jobs = s.pick(flags.jobs, "jobs", Some("NCITY_JOBS"))?.unwrap_or(1);
        if s.jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        s.run_id = s.pick(flags.run_id.map(str::to_owned), "run_id", Some("NCITY_RUN_ID"))?.unwrap_or_else(|| "default".into());
        ncity_core::catalog::validate_id(&s.run_id).map_err(|e| CliError::Usage(format!("run id: {e}")))?;
        let runs: PathBuf = s.pick(flags.runs.map(Path::to_path_buf), "runs", Some("NCITY_RUNS"))?.unwrap_or_else(|| "runs".into());
        s.run_dir = s.pick(flags.run_dir.map(Path::to_path_buf), "run_dir", Some("NCITY_RUN_DIR"))?.unwrap_or_else(|| runs.join(&s.run_id));
        Ok(s)
    }

    /// Flag, else config key, else environment variable.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, env: Option<&str>) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        if let Some(v) = self.config.parse::<T>(key).map_err(|e| CliError::Usage(format!("config {e}")))? {
            return Ok(Some(v));
        }
        match env {
            Some(name) => parse_env(name),
            None => Ok(None),
        }
    }

    /// Like [`Settings::pick`] for boolean switches, where an absent flag
    /// means "not given" rather than false.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.pick::<bool>(None, key, None)?.unwrap_or(false))
    }
}
