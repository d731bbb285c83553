mod evaluate;
mod fetch;
mod ingest;
mod locate;
mod serve;
mod stylize;

pub use evaluate::{evaluate, export_map, export_survey};
pub use fetch::fetch;
pub use ingest::ingest;
pub use locate::{locate, tune};
pub use serve::serve;
pub use stylize::stylize;

use crate::synth::{write_fixture, SynthSpec};
use crate::{CliError, Settings, StageExt, SynthArgs};
use ncity_core::geo::GeoCoordinate;

/// A worker pool bounded by `--jobs`.
fn pool(s: &Settings, stage: &'static str) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new().num_threads(s.jobs).build().stage(stage)
}

pub fn synth(s: &Settings, a: &SynthArgs) -> Result<(), CliError> {
    const STAGE: &str = "synth";
    let origin = GeoCoordinate::new(a.origin_lat, a.origin_lon).map_err(|e| CliError::Usage(e.to_string()))?;
    if a.pano_width < 16 || a.dim == 0 || a.public < 3 || !(a.box_deg > 0.0) || !(0.0..1.0).contains(&a.sea_fraction) {
        return Err(CliError::Usage("synth needs pano-width >= 16, dim >= 1, public >= 3, box-deg > 0, 0 <= sea-fraction < 1".into()));
    }
    let spec = SynthSpec {
        public: a.public,
        indoor: a.indoor,
        dim: a.dim,
        noise: a.noise,
        origin,
        box_deg: a.box_deg,
        sea_fraction: a.sea_fraction,
        seed: ncity_core::seed::derive_seed(s.seed, "synth"),
    };
    if s.dry_run {
        println!("would write a synthetic collection ({} public, {} indoor, dim {}) to {}", a.public, a.indoor, a.dim, a.out.display());
        return Ok(());
    }
    write_fixture(&spec, &a.out, a.pano_width).stage(STAGE)?;
    println!(
        "wrote {} public + {} indoor artworks to {} (catalog.csv, embeddings.emb, streetview/, fallbacks/, artworks/, truth.json)",
        a.public,
        a.indoor,
        a.out.display()
    );
    Ok(())
}
