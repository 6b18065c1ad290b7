use std::fmt;
use std::ops::Add;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Monotonic time in microseconds.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub const fn from_micros(us: u64) -> Self {
        Timestamp(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        Timestamp(ms * 1_000)
    }

    /// Rounds to the nearest microsecond; negative inputs clamp to zero.
    pub fn from_secs_f64(secs: f64) -> Self {
        Timestamp((secs * 1e6).round().max(0.0) as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    /// Elapsed microseconds since `earlier`, zero if `earlier` is later.
    pub fn micros_since(self, earlier: Timestamp) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl Add<u64> for Timestamp {
    type Output = Timestamp;

    fn add(self, us: u64) -> Timestamp {
        Timestamp(self.0.saturating_add(us))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// Immutable unit of data flowing between nodes.
///
/// The payload sits behind an `Arc`, so cloning a packet never copies the
/// payload and a clone is indistinguishable from the original.
pub struct Packet<T> {
    payload: Arc<T>,
    timestamp: Timestamp,
    seq: u64,
}

impl<T> Packet<T> {
    pub fn new(payload: T, timestamp: Timestamp, seq: u64) -> Self {
        Self::from_shared(Arc::new(payload), timestamp, seq)
    }

    pub fn from_shared(payload: Arc<T>, timestamp: Timestamp, seq: u64) -> Self {
        Self {
            payload,
            timestamp,
            seq,
        }
    }

    pub fn payload(&self) -> &T {
        &self.payload
    }

    pub fn shared_payload(&self) -> &Arc<T> {
        &self.payload
    }

    pub fn timestamp(&self) -> Timestamp {
        self.timestamp
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }
}

impl<T> Clone for Packet<T> {
    fn clone(&self) -> Self {
        Self {
            payload: Arc::clone(&self.payload),
            timestamp: self.timestamp,
            seq: self.seq,
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Packet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Packet")
            .field("seq", &self.seq)
            .field("timestamp", &self.timestamp)
            .field("payload", &self.payload)
            .finish()
    }
}

impl<T: PartialEq> PartialEq for Packet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq && self.timestamp == other.timestamp && self.payload == other.payload
    }
}

/// Payload types that can travel through a graph built from a [`GraphDef`].
///
/// Built-in node kinds need to mint bit packets (attention/control paths) and
/// synthetic indexed packets (test sources) without knowing the concrete type.
///
/// [`GraphDef`]: super::GraphDef
pub trait PacketData: Send + Sync + 'static {
    fn from_bit(bit: bool) -> Self;
    fn as_bit(&self) -> Option<bool>;
    fn from_index(index: u64) -> Self;
}

/// General-purpose payload for graphs that carry nothing domain specific.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Index(u64),
    Bit(bool),
    Text(String),
}

impl PacketData for Value {
    fn from_bit(bit: bool) -> Self {
        Value::Bit(bit)
    }

    fn as_bit(&self) -> Option<bool> {
        match self {
            Value::Bit(b) => Some(*b),
            _ => None,
        }
    }

    fn from_index(index: u64) -> Self {
        Value::Index(index)
    }
}
