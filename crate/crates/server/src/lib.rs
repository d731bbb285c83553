//! HTTP face of the exhibition: `/city`, `/artworks/{id}`, `/assets/...`
//! and `/health`. Reads take a snapshot of the current state; the only
//! writer is the tick timer, which persists before publishing.

use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use indexmap::IndexMap;
use ncity_core::feed::{city_geojson, tick, Clock, FeedError, FeedItem, FeedSnapshot, RevealSchedule, StateStore};
use serde_json::json;

pub struct Feed {
    snapshot: RwLock<FeedSnapshot>,
    items: IndexMap<String, FeedItem>,
    store: StateStore,
    clock: Arc<dyn Clock>,
    assets: Option<PathBuf>,
}

impl Feed {
    /// Resumes from the store when it holds the same schedule, then catches
    /// up to the clock.
    pub fn open(
        items: IndexMap<String, FeedItem>,
        schedule: RevealSchedule,
        store: StateStore,
        clock: Arc<dyn Clock>,
        assets: Option<PathBuf>,
    ) -> Result<Self, FeedError> {
        if let Some(id) = schedule.order.iter().find(|id| !items.contains_key(*id)) {
            return Err(FeedError::StateMismatch(format!("scheduled id `{id}` has no feed item")));
        }
        let snapshot = store.load_or_init(schedule)?;
        let feed = Self { snapshot: RwLock::new(snapshot), items, store, clock, assets };
        feed.advance()?;
        Ok(feed)
    }

    pub fn snapshot(&self) -> FeedSnapshot {
        self.snapshot.read().expect("state lock").clone()
    }

    /// One timer step. Returns how many ids were newly revealed. The state
    /// file is rewritten only when the revealed set grows (or is missing).
    pub fn advance(&self) -> Result<usize, FeedError> {
        let now = self.clock.now();
        let current = self.snapshot();
        let next = tick(&current.state, &current.schedule, now)?;
        let added = next.revealed.len() - current.state.revealed.len();
        let snap = FeedSnapshot { schedule: current.schedule, state: next };
        if added > 0 || !self.store.path().exists() {
            self.store.save(&snap)?;
        }
        *self.snapshot.write().expect("state lock") = snap;
        Ok(added)
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn city(State(feed): State<Arc<Feed>>) -> Response {
    let snap = feed.snapshot();
    match city_geojson(&snap.state.revealed, &feed.items) {
        Ok(v) => ([(header::CONTENT_TYPE, "application/geo+json")], Json(v)).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn artwork(State(feed): State<Arc<Feed>>, UrlPath(id): UrlPath<String>) -> Response {
    let snap = feed.snapshot();
    let Some(item) = feed.items.get(&id).filter(|_| snap.state.revealed.contains(&id)) else {
        return error(StatusCode::NOT_FOUND, format!("no revealed artwork `{id}`"));
    };
    let asset = |name: &str| format!("/assets/{id}/{name}");
    Json(json!({
        "id": item.id,
        "title": item.title,
        "artist": item.artist,
        "lat": item.coordinate.lat,
        "lon": item.coordinate.lon,
        "method": item.method,
        "source": item.source,
        "assets": {
            "panorama": asset("pano.png"),
            "depth": asset("depth.png"),
            "art_panorama": asset("art.png"),
            "art_panorama_upscaled": asset("art_up.png"),
        }
    }))
    .into_response()
}

fn safe_join(root: &Path, rel: &str) -> Option<PathBuf> {
    let rel = Path::new(rel);
    if rel.components().all(|c| matches!(c, Component::Normal(_))) {
        Some(root.join(rel))
    } else {
        None
    }
}

async fn assets(State(feed): State<Arc<Feed>>, UrlPath(rel): UrlPath<String>) -> Response {
    let Some(path) = feed.assets.as_deref().and_then(|root| safe_join(root, &rel)) else {
        return error(StatusCode::NOT_FOUND, "no such asset");
    };
    let mime = match path.extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, mime)], bytes).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, "no such asset"),
    }
}

async fn health(State(feed): State<Arc<Feed>>) -> Response {
    let snap = feed.snapshot();
    let n = snap.state.revealed.len();
    Json(json!({
        "revealed": n,
        "total": snap.schedule.total(),
        "next_reveal_at": snap.schedule.next_reveal_at(n).map(|t| t.to_rfc3339()),
    }))
    .into_response()
}

pub fn router(feed: Arc<Feed>) -> Router {
    Router::new()
        .route("/city", get(city))
        .route("/artworks/{id}", get(artwork))
        .route("/assets/{*path}", get(assets))
        .route("/health", get(health))
        .with_state(feed)
}

/// Bind, start the tick timer, and serve until ctrl-c.
pub async fn serve(feed: Arc<Feed>, bind: &str, tick_every: Duration) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("serving on {}", listener.local_addr()?);
    let timer_feed = feed.clone();
    tokio::spawn(async move {
        let mut every = tokio::time::interval(tick_every);
        loop {
            every.tick().await;
            match timer_feed.advance() {
                Ok(0) => {}
                Ok(n) => log::info!("revealed {n} more artwork(s)"),
                Err(e) => log::error!("tick failed: {e}"),
            }
        }
    });
    axum::serve(listener, router(feed))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
