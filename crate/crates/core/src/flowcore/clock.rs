use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use super::Timestamp;

/// Time source injected into every time-dependent component.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

/// Deterministic clock that only moves when told to.
///
/// Clones share the same underlying time.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now_us: Arc<AtomicU64>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(t: Timestamp) -> Self {
        let clock = Self::new();
        clock.now_us.store(t.as_micros(), Ordering::SeqCst);
        clock
    }

    /// Moves time forward to `t`. Earlier targets are ignored; time never runs backwards.
    pub fn advance_to(&self, t: Timestamp) {
        self.now_us.fetch_max(t.as_micros(), Ordering::SeqCst);
    }

    pub fn advance_by(&self, us: u64) {
        self.now_us.fetch_add(us, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_micros(self.now_us.load(Ordering::SeqCst))
    }
}

/// Wall clock measured from construction, optionally sped up.
#[derive(Debug, Clone)]
pub struct MonotonicClock {
    origin: Instant,
    speedup: f64,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self::with_speedup(1.0)
    }

    /// A clock where one real second counts as `speedup` graph seconds.
    pub fn with_speedup(speedup: f64) -> Self {
        assert!(speedup > 0.0, "speedup must be positive");
        Self {
            origin: Instant::now(),
            speedup,
        }
    }

    pub fn speedup(&self) -> f64 {
        self.speedup
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Timestamp {
        let us = self.origin.elapsed().as_secs_f64() * 1e6 * self.speedup;
        Timestamp::from_micros(us as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn virtual_clock_is_shared_and_monotone() {
        let a = VirtualClock::new();
        let b = a.clone();
        a.advance_to(Timestamp::from_micros(100));
        assert_eq!(b.now().as_micros(), 100);
        b.advance_to(Timestamp::from_micros(50));
        assert_eq!(a.now().as_micros(), 100);
        a.advance_by(5);
        assert_eq!(b.now().as_micros(), 105);
    }

    #[test]
    fn monotonic_clock_advances() {
        let c = MonotonicClock::with_speedup(1000.0);
        let t0 = c.now();
        std::thread::sleep(std::time::Duration::from_millis(2));
        assert!(c.now() > t0);
    }
}
