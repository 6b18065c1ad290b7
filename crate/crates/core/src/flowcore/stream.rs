use std::collections::VecDeque;
use std::sync::{Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::watchdog::{MonitorError, Violation, WatchEvent, Watchdog};
use super::{Packet, Timestamp};

/// Delivery contract of a stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StreamPolicy {
    /// Bounded queue. On overflow the oldest packet is evicted.
    Lossy {
        capacity: usize,
        max_successive_misses: u32,
    },
    /// Unbounded queue that never drops; packets older than `deadline_us` at
    /// pop time are reported as latency violations but still delivered.
    Lossless { deadline_us: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("lossy capacity must be >= 1")]
    ZeroCapacity,
    #[error("lossless deadline_us must be > 0")]
    ZeroDeadline,
}

impl StreamPolicy {
    pub fn lossy(capacity: usize, max_successive_misses: u32) -> Self {
        StreamPolicy::Lossy {
            capacity,
            max_successive_misses,
        }
    }

    pub fn lossless(deadline_us: u64) -> Self {
        StreamPolicy::Lossless { deadline_us }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match *self {
            StreamPolicy::Lossy { capacity: 0, .. } => Err(PolicyError::ZeroCapacity),
            StreamPolicy::Lossless { deadline_us: 0 } => Err(PolicyError::ZeroDeadline),
            _ => Ok(()),
        }
    }

    pub fn is_lossless(&self) -> bool {
        matches!(self, StreamPolicy::Lossless { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    Accepted,
    /// Accepted after evicting the oldest queued packet. `successive` is the
    /// length of the current run of evicting pushes.
    DroppedOldest { evicted_seq: u64, successive: u32 },
    /// The stream is closed.
    Rejected,
}

/// Counter snapshot. `pushed == delivered + dropped + queued` always holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamCounters {
    pub pushed: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub queued: u64,
    pub max_queued: u64,
}

struct State<T> {
    queue: VecDeque<Packet<T>>,
    closed: bool,
    successive_misses: u32,
    counters: StreamCounters,
    violations: Vec<Violation>,
    reported: usize,
    monitor_errors: Vec<MonitorError>,
    watchdog: Option<Watchdog>,
}

/// Single-ended thread-safe packet queue with a loss policy.
///
/// One producer and one consumer may use a stream concurrently from
/// different threads. Pushing never blocks on the consumer.
pub struct Stream<T> {
    id: String,
    policy: StreamPolicy,
    state: Mutex<State<T>>,
}

impl<T> Stream<T> {
    pub fn new(id: impl Into<String>, policy: StreamPolicy) -> Result<Self, PolicyError> {
        policy.validate()?;
        let queue = match policy {
            StreamPolicy::Lossy { capacity, .. } => VecDeque::with_capacity(capacity),
            StreamPolicy::Lossless { .. } => VecDeque::new(),
        };
        Ok(Self {
            id: id.into(),
            policy,
            state: Mutex::new(State {
                queue,
                closed: false,
                successive_misses: 0,
                counters: StreamCounters::default(),
                violations: Vec::new(),
                reported: 0,
                monitor_errors: Vec::new(),
                watchdog: None,
            }),
        })
    }

    pub fn with_watchdog(self, watchdog: Watchdog) -> Self {
        self.lock().watchdog = Some(watchdog);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn policy(&self) -> &StreamPolicy {
        &self.policy
    }

    fn lock(&self) -> MutexGuard<'_, State<T>> {
        // a panicking holder cannot leave the queue structurally invalid
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn push(&self, packet: Packet<T>) -> PushOutcome {
        let mut st = self.lock();
        if st.closed {
            return PushOutcome::Rejected;
        }
        let at = packet.timestamp();
        debug_assert!(
            st.queue.back().is_none_or(|last| last.seq() < packet.seq()),
            "stream {}: seq must be strictly increasing",
            self.id
        );
        observe(&mut st, WatchEvent::PacketIn(at));

        let mut outcome = PushOutcome::Accepted;
        if let StreamPolicy::Lossy {
            capacity,
            max_successive_misses,
        } = self.policy
        {
            if st.queue.len() >= capacity {
                let evicted = st.queue.pop_front().expect("capacity >= 1");
                st.counters.dropped += 1;
                st.successive_misses += 1;
                observe(&mut st, WatchEvent::Drop(at));
                let misses = st.successive_misses;
                if misses == max_successive_misses.saturating_add(1) {
                    st.violations
                        .push(Violation::miss_limit(at, misses, max_successive_misses));
                }
                outcome = PushOutcome::DroppedOldest {
                    evicted_seq: evicted.seq(),
                    successive: st.successive_misses,
                };
            } else {
                st.successive_misses = 0;
            }
        }

        st.queue.push_back(packet);
        st.counters.pushed += 1;
        st.counters.queued = st.queue.len() as u64;
        st.counters.max_queued = st.counters.max_queued.max(st.counters.queued);
        outcome
    }

    /// Pops the oldest packet. `now` is the consumer's current time, used for
    /// deadline and latency monitoring.
    pub fn pop(&self, now: Timestamp) -> Option<Packet<T>> {
        self.pop_if(now, |_| true)
    }

    /// Pops the oldest packet only if `accept` approves it.
    pub fn pop_if(&self, now: Timestamp, accept: impl FnOnce(&Packet<T>) -> bool) -> Option<Packet<T>> {
        let mut st = self.lock();
        if !st.queue.front().is_some_and(accept) {
            return None;
        }
        let packet = st.queue.pop_front()?;
        st.counters.delivered += 1;
        st.counters.queued = st.queue.len() as u64;
        if let StreamPolicy::Lossless { deadline_us } = self.policy {
            let age = now.micros_since(packet.timestamp());
            if age > deadline_us {
                st.violations.push(Violation::latency(now, age, deadline_us));
            }
        }
        observe(&mut st, WatchEvent::PacketOut(now));
        Some(packet)
    }

    pub fn peek_timestamp(&self) -> Option<Timestamp> {
        self.lock().queue.front().map(Packet::timestamp)
    }

    pub fn len(&self) -> usize {
        self.lock().queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn close(&self) {
        self.lock().closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    pub fn successive_misses(&self) -> u32 {
        self.lock().successive_misses
    }

    pub fn counters(&self) -> StreamCounters {
        self.lock().counters
    }

    /// Closes completed watchdog throughput windows up to `now`.
    pub fn flush_watchdog(&self, now: Timestamp) {
        let mut st = self.lock();
        if let Some(wd) = st.watchdog.as_mut() {
            let v = wd.flush(now);
            st.violations.extend(v);
        }
    }

    /// Every violation recorded so far, sorted by timestamp.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = self.lock().violations.clone();
        v.sort_by_key(|v| v.at);
        v
    }

    /// Violations recorded since the previous call.
    pub fn take_new_violations(&self) -> Vec<Violation> {
        let mut st = self.lock();
        let start = st.reported;
        st.reported = st.violations.len();
        st.violations[start..].to_vec()
    }

    pub fn monitor_errors(&self) -> Vec<MonitorError> {
        self.lock().monitor_errors.clone()
    }
}

fn observe<T>(st: &mut State<T>, event: WatchEvent) {
    let Some(wd) = st.watchdog.as_mut() else {
        return;
    };
    match wd.observe(event) {
        Ok(v) => st.violations.extend(v),
        Err(e) => st.monitor_errors.push(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowcore::watchdog::{ViolationKind, WatchdogConfig};

    fn pkt(seq: u64, us: u64) -> Packet<u64> {
        Packet::new(seq, Timestamp::from_micros(us), seq)
    }

    #[test]
    fn lossy_evicts_oldest() {
        let s = Stream::new("s", StreamPolicy::lossy(2, 10)).unwrap();
        assert_eq!(s.push(pkt(1, 0)), PushOutcome::Accepted);
        assert_eq!(s.push(pkt(2, 1)), PushOutcome::Accepted);
        assert_eq!(
            s.push(pkt(3, 2)),
            PushOutcome::DroppedOldest {
                evicted_seq: 1,
                successive: 1
            }
        );
        assert_eq!(s.successive_misses(), 1);
        let now = Timestamp::from_micros(3);
        assert_eq!(s.pop(now).unwrap().seq(), 2);
        assert_eq!(s.pop(now).unwrap().seq(), 3);
        assert!(s.pop(now).is_none());
    }

    #[test]
    fn miss_limit_violation() {
        let s = Stream::new("s", StreamPolicy::lossy(2, 2)).unwrap();
        for i in 1..=5 {
            s.push(pkt(i, i));
        }
        assert_eq!(s.successive_misses(), 3);
        let v = s.violations();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::BackpressureMissLimit);
        assert_eq!(v[0].observed, 3.0);
        assert_eq!(v[0].bound, 2.0);
        assert_eq!(v[0].at, Timestamp::from_micros(5));
    }

    #[test]
    fn miss_counter_resets_on_non_evicting_push() {
        let s = Stream::new("s", StreamPolicy::lossy(1, 5)).unwrap();
        s.push(pkt(1, 0));
        s.push(pkt(2, 0));
        assert_eq!(s.successive_misses(), 1);
        s.pop(Timestamp::ZERO);
        s.push(pkt(3, 0));
        assert_eq!(s.successive_misses(), 0);
    }

    #[test]
    fn lossless_keeps_everything_in_order() {
        let s = Stream::new("s", StreamPolicy::lossless(1_000)).unwrap();
        for i in 0..10_000 {
            assert_eq!(s.push(pkt(i, i)), PushOutcome::Accepted);
        }
        let now = Timestamp::from_micros(10_000);
        for i in 0..10_000 {
            assert_eq!(s.pop(now).unwrap().seq(), i);
        }
        let c = s.counters();
        assert_eq!((c.pushed, c.delivered, c.dropped, c.queued), (10_000, 10_000, 0, 0));
    }

    #[test]
    fn lossless_deadline_reported_not_enforced() {
        let s = Stream::new("s", StreamPolicy::lossless(1_000)).unwrap();
        s.push(pkt(0, 0));
        let p = s.pop(Timestamp::from_micros(1_500)).expect("still delivered");
        assert_eq!(p.seq(), 0);
        let v = s.violations();
        assert_eq!(v, vec![Violation::latency(Timestamp::from_micros(1_500), 1_500, 1_000)]);
    }

    #[test]
    fn pop_empty() {
        let s: Stream<u64> = Stream::new("s", StreamPolicy::lossless(1)).unwrap();
        assert!(s.pop(Timestamp::ZERO).is_none());
    }

    #[test]
    fn closed_rejects() {
        let s = Stream::new("s", StreamPolicy::lossy(1, 0)).unwrap();
        s.close();
        assert_eq!(s.push(pkt(0, 0)), PushOutcome::Rejected);
        assert_eq!(s.counters().pushed, 0);
    }

    #[test]
    fn invalid_policies() {
        assert_eq!(
            Stream::<u8>::new("s", StreamPolicy::lossy(0, 0)).err(),
            Some(PolicyError::ZeroCapacity)
        );
        assert_eq!(
            Stream::<u8>::new("s", StreamPolicy::lossless(0)).err(),
            Some(PolicyError::ZeroDeadline)
        );
    }

    #[test]
    fn watchdog_attached_does_not_change_counts() {
        let plain = Stream::new("a", StreamPolicy::lossy(3, 1)).unwrap();
        let watched = Stream::new("b", StreamPolicy::lossy(3, 1))
            .unwrap()
            .with_watchdog(
                Watchdog::new(WatchdogConfig {
                    max_latency_us: Some(1),
                    ..Default::default()
                })
                .unwrap(),
            );
        for i in 0..50u64 {
            for s in [&plain, &watched] {
                s.push(pkt(i, i * 10));
                if i % 4 == 0 {
                    s.pop(Timestamp::from_micros(i * 10 + 5));
                }
            }
        }
        assert_eq!(plain.counters(), watched.counters());
        assert!(watched.violations().len() > plain.violations().len());
    }

    #[test]
    fn policy_json_shape() {
        let p: StreamPolicy =
            serde_json::from_str(r#"{"kind":"lossy","capacity":4,"max_successive_misses":2}"#).unwrap();
        assert_eq!(p, StreamPolicy::lossy(4, 2));
        let p: StreamPolicy = serde_json::from_str(r#"{"kind":"lossless","deadline_us":1000}"#).unwrap();
        assert_eq!(p, StreamPolicy::lossless(1000));
        assert!(serde_json::from_str::<StreamPolicy>(r#"{"kind":"lossy","max_successive_misses":2}"#).is_err());
    }
}
