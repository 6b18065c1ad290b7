use serde::{Deserialize, Serialize};

use super::{Packet, Timestamp};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatchState {
    Open,
    #[default]
    Closed,
}

impl From<bool> for LatchState {
    fn from(bit: bool) -> Self {
        if bit {
            LatchState::Open
        } else {
            LatchState::Closed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatchTransition {
    pub at: Timestamp,
    pub state: LatchState,
}

#[derive(Debug)]
pub enum Gate<T> {
    Forwarded(Packet<T>),
    Suppressed,
}

impl<T> Gate<T> {
    pub fn forwarded(self) -> Option<Packet<T>> {
        match self {
            Gate::Forwarded(p) => Some(p),
            Gate::Suppressed => None,
        }
    }
}

/// Binary gate on a data stream, driven by timestamped control bits.
///
/// A control bit at time `t` governs every data packet with timestamp `>= t`
/// (control wins ties), independent of the order in which control and data
/// reach the latch, as long as the control arrives before the data it governs
/// is forwarded.
#[derive(Debug, Clone)]
pub struct Latch {
    base: LatchState,
    // sorted by timestamp; equal timestamps keep arrival order
    controls: Vec<(Timestamp, LatchState)>,
    last_control: LatchState,
    transitions: Vec<LatchTransition>,
    forwarded: u64,
    suppressed: u64,
}

impl Latch {
    pub fn new(initial: LatchState) -> Self {
        Self {
            base: initial,
            controls: Vec::new(),
            last_control: initial,
            transitions: Vec::new(),
            forwarded: 0,
            suppressed: 0,
        }
    }

    pub fn apply_control(&mut self, at: Timestamp, bit: bool) {
        let state = LatchState::from(bit);
        if state != self.last_control {
            self.transitions.push(LatchTransition { at, state });
        }
        self.last_control = state;
        let idx = self.controls.partition_point(|(t, _)| *t <= at);
        self.controls.insert(idx, (at, state));
    }

    pub fn control(&mut self, packet: &Packet<bool>) {
        self.apply_control(packet.timestamp(), *packet.payload());
    }

    pub fn state_at(&self, t: Timestamp) -> LatchState {
        let idx = self.controls.partition_point(|(c, _)| *c <= t);
        if idx == 0 {
            self.base
        } else {
            self.controls[idx - 1].1
        }
    }

    pub fn forward<T>(&mut self, packet: Packet<T>) -> Gate<T> {
        let t = packet.timestamp();
        let state = self.state_at(t);
        // controls at or before t can no longer affect anything newer than t
        let idx = self.controls.partition_point(|(c, _)| *c <= t);
        self.controls.drain(..idx);
        self.base = state;
        match state {
            LatchState::Open => {
                self.forwarded += 1;
                Gate::Forwarded(packet)
            }
            LatchState::Closed => {
                self.suppressed += 1;
                Gate::Suppressed
            }
        }
    }

    pub fn transitions(&self) -> &[LatchTransition] {
        &self.transitions
    }

    pub fn openings(&self) -> usize {
        self.transitions
            .iter()
            .filter(|t| t.state == LatchState::Open)
            .count()
    }

    pub fn forwarded(&self) -> u64 {
        self.forwarded
    }

    pub fn suppressed(&self) -> u64 {
        self.suppressed
    }
}

impl Default for Latch {
    fn default() -> Self {
        Self::new(LatchState::Closed)
    }
}
