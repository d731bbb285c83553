use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use ncity_core::feed::{FeedItem, RevealSchedule, StateStore, SystemClock, DEFAULT_INTERVAL_MINUTES};
use ncity_core::seed::derive_seed;
use ncity_core::stylize::read_manifest;
use ncity_server::Feed;

use crate::{CliError, RunDir, ServeArgs, Settings, StageExt};

const STAGE: &str = "serve";

pub fn feed_items(run: &RunDir) -> Result<IndexMap<String, FeedItem>, CliError> {
    let catalog = run.load_catalog(STAGE)?;
    let entries = read_manifest(&run.manifest()).stage(STAGE)?;
    if entries.is_empty() {
        return Err(CliError::stage(STAGE, "manifest is empty; run `stylize` first"));
    }
    Ok(entries
        .into_iter()
        .map(|e| {
            let r = catalog.records.get(&e.artwork_id);
            let item = FeedItem {
                id: e.artwork_id.clone(),
                title: r.map(|r| r.title.clone()).unwrap_or_default(),
                artist: r.map(|r| r.artist.clone()).unwrap_or_default(),
                coordinate: e.coordinate,
                method: e.method.map(|m| m.as_str().to_owned()),
                source: Some(e.panorama.source.as_str().to_owned()),
                art_panorama_url: e.asset("art_up").map(|a| format!("/assets/{}", a.file)),
            };
            (e.artwork_id, item)
        })
        .collect())
}

pub fn serve(s: &Settings, run: &RunDir, a: &ServeArgs) -> Result<(), CliError> {
    let interval = s.pick(a.interval_minutes, "interval_minutes", None)?.unwrap_or(DEFAULT_INTERVAL_MINUTES);
    let batch = s.pick(a.batch, "batch", None)?.unwrap_or(1);
    let bind = s.pick(a.bind.clone(), "bind", None)?.unwrap_or_else(|| "127.0.0.1:8080".into());
    let tick = s.pick(a.tick_seconds, "tick_seconds", None)?.unwrap_or(10).max(1);
    let store = StateStore::new(run.path("feed_state.json"));
    let epoch = match s.pick(a.epoch.clone(), "epoch", None)? {
        Some(text) => DateTime::parse_from_rfc3339(&text).map_err(|e| CliError::Usage(format!("epoch `{text}`: {e}")))?.with_timezone(&Utc),
        None => match store.load().stage(STAGE)? {
            Some(snap) => snap.schedule.epoch,
            None => Utc::now(),
        },
    };
    let items = feed_items(run)?;
    let ids: Vec<String> = items.keys().cloned().collect();
    let schedule =
        RevealSchedule::new(&ids, derive_seed(s.seed, "feed"), chrono::Duration::minutes(interval), batch, epoch).stage(STAGE)?;
    if s.dry_run {
        println!(
            "would serve {} artworks on {bind}, {batch} every {interval} min from {}; state in {}",
            ids.len(),
            epoch.to_rfc3339(),
            store.path().display()
        );
        return Ok(());
    }
    let feed = Feed::open(items, schedule, store, Arc::new(SystemClock), Some(run.root().to_path_buf())).stage(STAGE)?;
    let snap = feed.snapshot();
    println!("serving {} artworks ({} revealed) on {bind}", snap.schedule.total(), snap.state.revealed.len());
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().stage(STAGE)?;
    rt.block_on(ncity_server::serve(Arc::new(feed), &bind, Duration::from_secs(tick))).stage(STAGE)
}
