use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::{PanoramaError, StreetViewBackend, StreetViewHit};
use crate::geo::GeoCoordinate;

/// Spaces backend calls at least `1 / max_per_sec` apart across all threads.
pub struct RateLimited<B> {
    inner: B,
    gap: Duration,
    next: Mutex<Instant>,
}

impl<B> RateLimited<B> {
    pub fn new(inner: B, max_per_sec: f64) -> Result<Self, PanoramaError> {
        if !(max_per_sec.is_finite() && max_per_sec > 0.0) {
            return Err(PanoramaError::BadPolicy(format!("request rate must be positive, got {max_per_sec}")));
        }
        Ok(Self { inner, gap: Duration::from_secs_f64(1.0 / max_per_sec), next: Mutex::new(Instant::now()) })
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    fn wait_turn(&self) {
        let slot = {
            let mut next = self.next.lock().expect("rate lock");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.gap;
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

impl<B: StreetViewBackend> StreetViewBackend for RateLimited<B> {
    fn lookup(&self, at: GeoCoordinate, radius_m: f64) -> Result<Option<StreetViewHit>, PanoramaError> {
        self.wait_turn();
        self.inner.lookup(at, radius_m)
    }
}
