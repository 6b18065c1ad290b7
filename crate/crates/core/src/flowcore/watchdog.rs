//! Passive real-time monitoring of a stream.
//!
//! A [`Watchdog`] only looks at timestamps; it never blocks or alters packet
//! flow. Violations are reported, not enforced.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    LatencyExceeded,
    ThroughputBelow,
    BackpressureMissLimit,
}

/// A single bound violation. `observed` always violates `bound`.
///
/// Units: microseconds for latency, hertz for throughput, packet count for
/// the miss limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub at: Timestamp,
    pub observed: f64,
    pub bound: f64,
}

impl Violation {
    pub fn latency(at: Timestamp, observed_us: u64, bound_us: u64) -> Self {
        Self {
            kind: ViolationKind::LatencyExceeded,
            at,
            observed: observed_us as f64,
            bound: bound_us as f64,
        }
    }

    pub fn throughput(at: Timestamp, observed_hz: f64, bound_hz: f64) -> Self {
        Self {
            kind: ViolationKind::ThroughputBelow,
            at,
            observed: observed_hz,
            bound: bound_hz,
        }
    }

    pub fn miss_limit(at: Timestamp, misses: u32, limit: u32) -> Self {
        Self {
            kind: ViolationKind::BackpressureMissLimit,
            at,
            observed: misses as f64,
            bound: limit as f64,
        }
    }
}

/// All violations recorded against one stream, ordered by timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatchdogReport {
    pub stream_id: String,
    pub violations: Vec<Violation>,
}

/// Latency and throughput requirements for one stream. Any bound left as
/// `None` is disabled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatchdogConfig {
    #[serde(default)]
    pub max_latency_us: Option<u64>,
    #[serde(default)]
    pub min_throughput_hz: Option<f64>,
    #[serde(default)]
    pub window_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WatchdogConfigError {
    #[error("max_latency_us must be > 0")]
    ZeroLatency,
    #[error("min_throughput_hz must be a positive finite rate, got {0}")]
    BadThroughput(f64),
    #[error("window_us must be > 0")]
    ZeroWindow,
    #[error("min_throughput_hz requires window_us")]
    MissingWindow,
}

impl WatchdogConfig {
    pub fn validate(&self) -> Result<(), WatchdogConfigError> {
        if self.max_latency_us == Some(0) {
            return Err(WatchdogConfigError::ZeroLatency);
        }
        if self.window_us == Some(0) {
            return Err(WatchdogConfigError::ZeroWindow);
        }
        if let Some(hz) = self.min_throughput_hz {
            if !(hz.is_finite() && hz > 0.0) {
                return Err(WatchdogConfigError::BadThroughput(hz));
            }
            if self.window_us.is_none() {
                return Err(WatchdogConfigError::MissingWindow);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WatchEvent {
    PacketIn(Timestamp),
    PacketOut(Timestamp),
    Drop(Timestamp),
}

impl WatchEvent {
    pub fn at(self) -> Timestamp {
        match self {
            WatchEvent::PacketIn(t) | WatchEvent::PacketOut(t) | WatchEvent::Drop(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("event at {got} precedes previous event at {last}")]
    OutOfOrder { last: Timestamp, got: Timestamp },
}

/// Throughput uses tumbling windows aligned to the first observed event.
/// Latency pairs `PacketIn`/`PacketOut` in FIFO order; a `Drop` retires the
/// oldest pending packet, matching a lossy stream's evict-oldest rule.
#[derive(Debug, Clone)]
pub struct Watchdog {
    config: WatchdogConfig,
    last_event: Option<Timestamp>,
    pending_in: VecDeque<Timestamp>,
    window_start: Option<Timestamp>,
    outs_in_window: u64,
}

impl Watchdog {
    pub fn new(config: WatchdogConfig) -> Result<Self, WatchdogConfigError> {
        config.validate()?;
        Ok(Self {
            config,
            last_event: None,
            pending_in: VecDeque::new(),
            window_start: None,
            outs_in_window: 0,
        })
    }

    pub fn config(&self) -> &WatchdogConfig {
        &self.config
    }

    /// Feeds one event. An out-of-order event still updates latency pairing
    /// (the packet really moved) but is excluded from throughput accounting.
    pub fn observe(&mut self, event: WatchEvent) -> Result<Vec<Violation>, MonitorError> {
        let at = event.at();
        let in_order = self.last_event.is_none_or(|last| at >= last);
        let mut out = Vec::new();

        if in_order {
            self.last_event = Some(at);
            self.close_windows(at, &mut out);
            if self.window_start.is_none() {
                self.window_start = Some(at);
            }
        }

        match event {
            WatchEvent::PacketIn(t) => self.pending_in.push_back(t),
            WatchEvent::Drop(_) => {
                self.pending_in.pop_front();
            }
            WatchEvent::PacketOut(t) => {
                if in_order {
                    self.outs_in_window += 1;
                }
                if let Some(entered) = self.pending_in.pop_front() {
                    let latency = t.micros_since(entered);
                    if let Some(bound) = self.config.max_latency_us {
                        if latency > bound {
                            out.push(Violation::latency(t, latency, bound));
                        }
                    }
                }
            }
        }

        if in_order {
            Ok(out)
        } else {
            Err(MonitorError::OutOfOrder {
                last: self.last_event.unwrap_or_default(),
                got: at,
            })
        }
    }

    /// Closes every throughput window that ends at or before `now`.
    pub fn flush(&mut self, now: Timestamp) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.last_event.is_some_and(|last| now >= last) {
            self.close_windows(now, &mut out);
        }
        out
    }

    fn close_windows(&mut self, now: Timestamp, out: &mut Vec<Violation>) {
        let (Some(bound_hz), Some(window_us)) =
            (self.config.min_throughput_hz, self.config.window_us)
        else {
            return;
        };
        let Some(mut start) = self.window_start else {
            return;
        };
        while now.as_micros() >= start.as_micros() + window_us {
            let end = start + window_us;
            let rate = self.outs_in_window as f64 / (window_us as f64 / 1e6);
            if rate < bound_hz {
                out.push(Violation::throughput(end, rate, bound_hz));
            }
            self.outs_in_window = 0;
            start = end;
        }
        self.window_start = Some(start);
    }
}
