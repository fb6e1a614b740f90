use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use crate::extraction::{Extractor, ExtractorSpec, SemanticValue};

/// Time source for filter timing. Only differences between readings matter.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

/// Starts on first reading, so constructing one never touches the OS clock
/// (targets without one can swap in another clock before querying).
#[derive(Debug, Default)]
pub struct SystemClock {
    start: OnceLock<Instant>,
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.get_or_init(Instant::now).elapsed()
    }
}

/// Manually advanced clock; simulated work calls [`SimClock::advance`].
#[derive(Debug, Default)]
pub struct SimClock {
    nanos: AtomicU64,
}

impl SimClock {
    pub fn new() -> Self {
        SimClock::default()
    }

    pub fn advance(&self, d: Duration) {
        self.nanos.fetch_add(d.as_nanos() as u64, Ordering::SeqCst);
    }
}

impl Clock for SimClock {
    fn now(&self) -> Duration {
        Duration::from_nanos(self.nanos.load(Ordering::SeqCst))
    }
}

/// Charges a fixed simulated latency to a [`SimClock`] per extraction
/// instead of sleeping.
pub struct SimulatedLatency {
    pub inner: Arc<dyn Extractor>,
    pub clock: Arc<SimClock>,
    pub cost: Duration,
}

impl Extractor for SimulatedLatency {
    fn spec(&self) -> ExtractorSpec {
        self.inner.spec()
    }

    fn extract(&self, bytes: &[u8]) -> Result<SemanticValue, String> {
        self.clock.advance(self.cost);
        self.inner.extract(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_clock_moves_only_when_advanced() {
        let c = SimClock::new();
        let t0 = c.now();
        assert_eq!(c.now(), t0);
        c.advance(Duration::from_millis(100));
        assert_eq!(c.now() - t0, Duration::from_millis(100));
    }

    #[test]
    fn system_clock_is_monotone() {
        let c = SystemClock::default();
        let a = c.now();
        assert!(c.now() >= a);
    }
}
