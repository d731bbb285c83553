//! Timed reveal of the curated city: a seeded order of artwork ids, one
//! batch per interval since the epoch, persisted as a single JSON file.

mod city;
mod map;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::raster::write_atomic;

pub use city::{city_geojson, validate_feature_collection, FeedItem};
pub use map::{export_map, render_map, MapPoint, MarkerKind};

#[derive(Debug, Error)]
pub enum FeedError {
    #[error("clock moved backwards: now {now} is before last tick {last}")]
    ClockSkew { now: DateTime<Utc>, last: DateTime<Utc> },
    #[error("nothing to plot")]
    EmptyInput,
    #[error("duplicate artwork id `{0}` in reveal order")]
    DuplicateId(String),
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
    #[error("persisted state does not match the schedule: {0}")]
    StateMismatch(String),
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

mod minutes {
    use chrono::Duration;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i64(d.num_minutes())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let m = i64::deserialize(d)?;
        Duration::try_minutes(m).ok_or_else(|| serde::de::Error::custom("interval out of range"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevealSchedule {
    #[serde(with = "minutes", rename = "interval_minutes")]
    pub interval: Duration,
    pub batch: usize,
    pub order: Vec<String>,
    pub epoch: DateTime<Utc>,
}

pub const DEFAULT_INTERVAL_MINUTES: i64 = 30;

impl RevealSchedule {
    /// Seeded shuffle of `ids` (taken in the given order).
    pub fn new(ids: &[String], seed: u64, interval: Duration, batch: usize, epoch: DateTime<Utc>) -> Result<Self, FeedError> {
        let mut order = ids.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let s = Self { interval, batch, order, epoch };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), FeedError> {
        if self.interval <= Duration::zero() {
            return Err(FeedError::BadSchedule("interval must be positive".into()));
        }
        if self.batch == 0 {
            return Err(FeedError::BadSchedule("batch must be at least 1".into()));
        }
        let mut seen = HashSet::with_capacity(self.order.len());
        if let Some(dup) = self.order.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(FeedError::DuplicateId(dup.clone()));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.order.len()
    }

    /// Number of ids due at `now`, clamped to the order length.
    pub fn due(&self, now: DateTime<Utc>) -> usize {
        if now < self.epoch {
            return 0;
        }
        let elapsed = (now - self.epoch).num_milliseconds() as u128;
        let step = self.interval.num_milliseconds().max(1) as u128;
        let due = (elapsed / step).saturating_mul(self.batch as u128);
        due.min(self.order.len() as u128) as usize
    }

    /// When the next batch appears, or `None` once everything is out.
    pub fn next_reveal_at(&self, revealed: usize) -> Option<DateTime<Utc>> {
        if revealed >= self.order.len() {
            return None;
        }
        let k = i32::try_from(revealed / self.batch + 1).ok()?;
        self.epoch.checked_add_signed(self.interval.checked_mul(k)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhibitionState {
    pub revealed: Vec<String>,
    pub last_tick: DateTime<Utc>,
}

impl ExhibitionState {
    pub fn initial(schedule: &RevealSchedule) -> Self {
        Self { revealed: Vec::new(), last_tick: schedule.epoch }
    }

    fn check_prefix(&self, schedule: &RevealSchedule) -> Result<(), FeedError> {
        if self.revealed.len() > schedule.order.len() || schedule.order[..self.revealed.len()] != self.revealed[..] {
            return Err(FeedError::StateMismatch("revealed ids are not a prefix of the reveal order".into()));
        }
        Ok(())
    }
}

/// Advance to `now`. Equal `now` is a no-op; the revealed prefix never shrinks.
pub fn tick(state: &ExhibitionState, schedule: &RevealSchedule, now: DateTime<Utc>) -> Result<ExhibitionState, FeedError> {
    if now < state.last_tick {
        return Err(FeedError::ClockSkew { now, last: state.last_tick });
    }
    state.check_prefix(schedule)?;
    let n = schedule.due(now).max(state.revealed.len());
    Ok(ExhibitionState { revealed: schedule.order[..n].to_vec(), last_tick: now })
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(at: DateTime<Utc>) -> Self {
        Self(Mutex::new(at))
    }

    pub fn set(&self, at: DateTime<Utc>) {
        *self.0.lock().expect("clock lock") = at;
    }

    pub fn advance(&self, by: Duration) {
        let mut t = self.0.lock().expect("clock lock");
        *t += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().expect("clock lock")
    }
}

/// Schedule and state together, as persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedSnapshot {
    pub schedule: RevealSchedule,
    pub state: ExhibitionState,
}

pub fn parse_snapshot(bytes: &[u8]) -> Result<FeedSnapshot, FeedError> {
    let snap: FeedSnapshot = serde_json::from_slice(bytes).map_err(|e| FeedError::Format { what: "feed state", reason: e.to_string() })?;
    snap.schedule.validate()?;
    snap.state.check_prefix(&snap.schedule)?;
    Ok(snap)
}

/// Single JSON file replaced by atomic rename on every save.
pub struct StateStore {
    path: PathBuf,
}

impl StateStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn load(&self) -> Result<Option<FeedSnapshot>, FeedError> {
        match std::fs::read(&self.path) {
            Ok(bytes) => parse_snapshot(&bytes).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, snap: &FeedSnapshot) -> Result<(), FeedError> {
        let json = serde_json::to_vec_pretty(snap).expect("snapshot serializes");
        write_atomic(&self.path, &json)?;
        Ok(())
    }

    /// Resume a persisted snapshot when its schedule matches, else start fresh.
    pub fn load_or_init(&self, schedule: RevealSchedule) -> Result<FeedSnapshot, FeedError> {
        match self.load()? {
            Some(snap) if snap.schedule == schedule => Ok(snap),
            Some(_) => Err(FeedError::StateMismatch(format!("{} holds a different schedule", self.path.display()))),
            None => {
                let snap = FeedSnapshot { state: ExhibitionState::initial(&schedule), schedule };
                self.save(&snap)?;
                Ok(snap)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedConfig {
    pub interval_minutes: i64,
    pub batch: usize,
    pub seed: u64,
    pub bind: String,
    pub run_dir: Option<PathBuf>,
}

impl Default for FeedConfig {
    fn default() -> Self {
        Self { interval_minutes: DEFAULT_INTERVAL_MINUTES, batch: 1, seed: 0, bind: "127.0.0.1:8080".into(), run_dir: None }
    }
}

pub const FEED_KEYS: [&str; 5] = ["interval_minutes", "batch", "seed", "bind", "run_dir"];

impl FeedConfig {
    /// Values present in `kv` override the defaults.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, FeedError> {
        let d = Self::default();
        let cfg = Self {
            interval_minutes: kv.parse("interval_minutes")?.unwrap_or(d.interval_minutes),
            batch: kv.parse("batch")?.unwrap_or(d.batch),
            seed: kv.parse("seed")?.unwrap_or(d.seed),
            bind: kv.get("bind").map_or(d.bind, str::to_owned),
            run_dir: kv.get("run_dir").map(PathBuf::from),
        };
        if cfg.interval_minutes <= 0 || cfg.batch == 0 {
            return Err(FeedError::BadSchedule("interval_minutes and batch must be positive".into()));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2023, 5, 20, 12, 0, 0).unwrap()
    }

    fn schedule(n: usize, batch: usize) -> RevealSchedule {
        let ids: Vec<String> = (0..n).map(|i| format!("a{i}")).collect();
        RevealSchedule::new(&ids, 42, Duration::minutes(30), batch, t0()).unwrap()
    }

    #[test]
    fn ninety_minutes_reveals_three() {
        let s = schedule(10, 1);
        let st = tick(&ExhibitionState::initial(&s), &s, t0() + Duration::minutes(90)).unwrap();
        assert_eq!(st.revealed, s.order[..3]);
        assert_eq!(tick(&st, &s, st.last_tick).unwrap(), st);
        assert_eq!(s.next_reveal_at(3), Some(t0() + Duration::minutes(120)));
    }

    #[test]
    fn batches_and_clamp() {
        let s = schedule(5, 2);
        let st = tick(&ExhibitionState::initial(&s), &s, t0() + Duration::minutes(61)).unwrap();
        assert_eq!(st.revealed.len(), 4);
        let all = tick(&st, &s, t0() + Duration::days(365 * 100)).unwrap();
        assert_eq!(all.revealed, s.order);
        assert_eq!(s.next_reveal_at(5), None);
        assert_eq!(s.due(t0() - Duration::minutes(5)), 0);
    }

    #[test]
    fn clock_skew_is_an_error() {
        let s = schedule(3, 1);
        let st = tick(&ExhibitionState::initial(&s), &s, t0() + Duration::minutes(40)).unwrap();
        assert!(matches!(tick(&st, &s, t0() + Duration::minutes(39)), Err(FeedError::ClockSkew { .. })));
    }

    #[test]
    fn order_is_seeded_permutation() {
        let a = schedule(50, 1);
        let b = schedule(50, 1);
        assert_eq!(a.order, b.order);
        let mut sorted = a.order.clone();
        sorted.sort();
        let mut expected: Vec<String> = (0..50).map(|i| format!("a{i}")).collect();
        expected.sort();
        assert_eq!(sorted, expected);
        let dup = vec!["x".to_owned(), "x".to_owned()];
        assert!(matches!(RevealSchedule::new(&dup, 0, Duration::minutes(1), 1, t0()), Err(FeedError::DuplicateId(_))));
    }

    #[test]
    fn restart_matches_continuous_run() {
        let dir = tempfile::tempdir().unwrap();
        let s = schedule(8, 1);
        let store = StateStore::new(dir.path().join("state.json"));
        let mut snap = store.load_or_init(s.clone()).unwrap();
        let mut continuous = ExhibitionState::initial(&s);
        for m in [10, 35, 70, 95] {
            let now = t0() + Duration::minutes(m);
            continuous = tick(&continuous, &s, now).unwrap();
            if m == 35 {
                snap.state = tick(&snap.state, &s, now).unwrap();
                store.save(&snap).unwrap();
            }
        }
        let restored = store.load_or_init(s.clone()).unwrap();
        let resumed = tick(&restored.state, &s, t0() + Duration::minutes(95)).unwrap();
        assert_eq!(resumed, continuous);
    }

    #[test]
    fn snapshot_parsing_rejects_non_prefix_state() {
        let s = schedule(3, 1);
        let mut snap = FeedSnapshot { state: ExhibitionState::initial(&s), schedule: s };
        snap.state.revealed = vec!["zz".into()];
        let json = serde_json::to_vec(&snap).unwrap();
        assert!(matches!(parse_snapshot(&json), Err(FeedError::StateMismatch(_))));
        assert!(parse_snapshot(b"{}").is_err());
    }

    #[test]
    fn config_overrides() {
        let kv = crate::config::parse_key_values("interval_minutes=5\nbatch=2\nbind=0.0.0.0:9000").unwrap();
        let c = FeedConfig::from_key_values(&kv).unwrap();
        assert_eq!((c.interval_minutes, c.batch, c.bind.as_str()), (5, 2, "0.0.0.0:9000"));
        let bad = crate::config::parse_key_values("batch=0").unwrap();
        assert!(FeedConfig::from_key_values(&bad).is_err());
    }
}
