use std::time::Duration;

use ncity_core::panorama::Panorama;
use ncity_core::raster::load_rgb;
use ncity_core::seed::derive_seed;
use ncity_core::stylize::{
    manifest_digest, run_batch, Backends, HttpModelServer, MockDepth, MockGenerator, MockUpscaler, PipelineJob, StylizeOptions,
    DEFAULT_SEAM_TOLERANCE, DEFAULT_STEPS, DEFAULT_UPSCALE,
};
use serde_json::json;

use crate::store::{FetchRecord, FetchSummary};
use crate::{CliError, RunDir, Settings, StageExt, StylizeArgs};

const STAGE: &str = "stylize";

enum Models {
    Mock(MockDepth, MockGenerator, MockUpscaler),
    Http(HttpModelServer),
}

impl Models {
    fn backends(&self) -> Backends<'_> {
        match self {
            Models::Mock(d, g, u) => Backends { depth: d, generate: g, upscale: u },
            Models::Http(h) => Backends { depth: h, generate: h, upscale: h },
        }
    }
}

fn models(s: &Settings, a: &StylizeArgs) -> Result<Models, CliError> {
    let name = s.pick(a.backend.clone(), "model_backend", None)?.unwrap_or_else(|| "mock".into());
    Ok(match name.as_str() {
        "mock" => Models::Mock(MockDepth::default(), MockGenerator::tiling(), MockUpscaler::default()),
        // ignores the tiling request; useful for checking the seam guard
        "mock-nontiling" => Models::Mock(MockDepth::default(), MockGenerator::non_tiling(), MockUpscaler::default()),
        "http" => {
            let url = s
                .pick(a.model_url.clone(), "model_url", Some("NCITY_MODEL_URL"))?
                .ok_or_else(|| CliError::Usage("the http backend needs --model-url".into()))?;
            let timeout = s.pick(a.model_timeout_secs, "model_timeout_secs", None)?.unwrap_or(300);
            Models::Http(HttpModelServer::new(&url, Duration::from_secs(timeout)).stage(STAGE)?)
        }
        other => return Err(CliError::Usage(format!("unknown model backend `{other}` (mock | mock-nontiling | http)"))),
    })
}

pub fn stylize(s: &Settings, run: &RunDir, a: &StylizeArgs) -> Result<(), CliError> {
    let opts = StylizeOptions {
        steps: s.pick(a.steps, "steps", None)?.unwrap_or(DEFAULT_STEPS),
        tiling: s.pick(a.tiling, "tiling", None)?.unwrap_or(true),
        seam_tolerance: s.pick(a.seam_tolerance, "seam_tolerance", None)?.unwrap_or(DEFAULT_SEAM_TOLERANCE),
        upscale_factor: s.pick(a.upscale, "upscale", None)?.unwrap_or(DEFAULT_UPSCALE),
    };
    let summary: FetchSummary =
        run.read_json(&run.path("fetch.json"), STAGE)?.ok_or_else(|| CliError::stage(STAGE, "no fetch.json; run `fetch` first"))?;
    if s.dry_run {
        let done = summary.artworks.iter().filter(|id| run.path(id).join("entry.json").exists()).count();
        println!("would stylize {} panoramas ({done} already complete) with {opts:?}", summary.artworks.len() - done);
        return Ok(());
    }
    let models = models(s, a)?;
    let catalog = run.load_catalog(STAGE)?;
    let jobs = summary
        .artworks
        .iter()
        .map(|id| {
            let rec: FetchRecord = run
                .read_json(&run.fetch_record(id), STAGE)?
                .ok_or_else(|| CliError::stage(STAGE, format!("{id}: fetch record missing")))?;
            let record = catalog.records.get(id).ok_or_else(|| CliError::stage(STAGE, format!("{id}: not in the catalog")))?;
            let pixels = load_rgb(&run.fetch_image(id)).map_err(|e| CliError::stage(STAGE, format!("{id}: {e}")))?;
            Ok(PipelineJob {
                artwork_id: id.clone(),
                prompt: record.prompt.clone(),
                coordinate: rec.coordinate,
                method: rec.method,
                neighbors: rec.neighbors,
                panorama: Panorama { pixels, source: rec.source, anchor: rec.anchor, radius_used: rec.radius_used },
                seed: derive_seed(s.seed, &format!("stylize/{id}")),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let entries = run_batch(run.root(), &jobs, models.backends(), &opts, s.jobs).stage(STAGE)?;
    let digest = manifest_digest(&run.manifest()).stage(STAGE)?;
    let worst = entries.iter().map(|e| e.seam_post_upscale.max(e.seam_pre_upscale)).fold(0.0, f64::max);
    run.record_stage(&s.run_id, s.seed, STAGE, derive_seed(s.seed, "stylize"), &json!({ "options": opts }))?;
    println!("stylized {} artworks; worst seam {:.5}; manifest sha256 {digest}", entries.len(), worst);
    Ok(())
}
