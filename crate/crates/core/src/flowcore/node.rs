use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Latch, LatchState, Packet, PacketData, PushOutcome, Stream, Timestamp, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct NodeError(pub String);

impl NodeError {
    pub fn new(msg: impl Into<String>) -> Self {
        NodeError(msg.into())
    }
}

/// When a node wants to run next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wake {
    /// As soon as any input stream receives a packet.
    Input,
    /// At the given time; new input does not wake the node earlier.
    At(Timestamp),
    /// On new input or at the given time, whichever comes first.
    InputOrAt(Timestamp),
    /// Never again.
    Done,
}

/// A computation unit. The executor never runs one node reentrantly or from
/// two threads at once; implementations must tolerate spurious wakes.
pub trait Node<P>: Send {
    fn start(&mut self, ctx: &mut NodeContext<'_, P>) -> Result<Wake, NodeError> {
        let _ = ctx;
        Ok(Wake::Input)
    }

    fn wake(&mut self, ctx: &mut NodeContext<'_, P>) -> Result<Wake, NodeError>;
}

/// Structured entries of a run's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Dropped {
        at: Timestamp,
        stream: String,
        seq: u64,
        successive: u32,
    },
    LatchTransition {
        at: Timestamp,
        stream: String,
        state: LatchState,
    },
    Violation {
        stream: String,
        #[serde(flatten)]
        violation: Violation,
    },
    /// Free-form, node-emitted event (skill invocations, speech, LED state, ...).
    Note {
        at: Timestamp,
        node: String,
        tag: String,
        detail: serde_json::Value,
    },
    NodeFailed {
        at: Timestamp,
        node: String,
        reason: String,
    },
}

/// Tag of the note a skill-dispatching node emits per invocation.
pub const SKILL_INVOKED: &str = "skill_invoked";

#[derive(Debug, Default)]
pub struct EventLog {
    events: Mutex<Vec<LogEvent>>,
}

impl EventLog {
    pub fn push(&self, e: LogEvent) {
        self.events.lock().unwrap_or_else(|e| e.into_inner()).push(e);
    }

    pub fn snapshot(&self) -> Vec<LogEvent> {
        self.events.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn into_inner(self) -> Vec<LogEvent> {
        self.events.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}

pub(crate) struct LatchBinding<P> {
    pub(crate) stream_id: String,
    pub(crate) latch: Arc<Mutex<Latch>>,
    pub(crate) control: Arc<Stream<P>>,
}

pub(crate) struct InputBinding<P> {
    pub(crate) stream: Arc<Stream<P>>,
    pub(crate) latch: Option<LatchBinding<P>>,
}

pub(crate) struct OutputBinding<P> {
    pub(crate) stream: Arc<Stream<P>>,
    pub(crate) next_seq: u64,
    pub(crate) consumer: Option<usize>,
}

/// A node's view of the graph while it runs.
pub struct NodeContext<'a, P> {
    pub(crate) node_id: &'a str,
    pub(crate) now: Timestamp,
    pub(crate) inputs: &'a BTreeMap<String, InputBinding<P>>,
    pub(crate) outputs: &'a mut BTreeMap<String, OutputBinding<P>>,
    pub(crate) log: &'a EventLog,
    pub(crate) touched: Vec<usize>,
    pub(crate) pushes: u64,
}

impl<'a, P: PacketData> NodeContext<'a, P> {
    pub fn node_id(&self) -> &str {
        self.node_id
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn has_input(&self, port: &str) -> bool {
        self.inputs.get(port).is_some_and(|b| !b.stream.is_empty())
    }

    pub fn is_connected(&self, port: &str) -> bool {
        self.inputs.contains_key(port) || self.outputs.contains_key(port)
    }

    /// Pops the next packet that makes it through the port's latch, if any.
    pub fn pop(&mut self, port: &str) -> Result<Option<Packet<P>>, NodeError> {
        let binding = self
            .inputs
            .get(port)
            .ok_or_else(|| NodeError(format!("{}: no input port `{port}`", self.node_id)))?;
        loop {
            let Some(packet) = binding.stream.pop(self.now) else {
                return Ok(None);
            };
            let Some(lb) = &binding.latch else {
                return Ok(Some(packet));
            };
            let mut latch = lb.latch.lock().unwrap_or_else(|e| e.into_inner());
            apply_controls(lb, &mut latch, packet.timestamp(), self.now, self.log);
            if let Some(p) = latch.forward(packet).forwarded() {
                return Ok(Some(p));
            }
        }
    }

    /// Drains an input port.
    pub fn pop_all(&mut self, port: &str) -> Result<Vec<Packet<P>>, NodeError> {
        let mut out = Vec::new();
        while let Some(p) = self.pop(port)? {
            out.push(p);
        }
        Ok(out)
    }

    pub fn push(&mut self, port: &str, payload: P) -> Result<PushOutcome, NodeError> {
        self.push_shared(port, Arc::new(payload))
    }

    /// Emits a packet stamped with the current time and the stream's next seq.
    /// Pushing to an unconnected (optional) port is a no-op returning `Rejected`.
    pub fn push_shared(&mut self, port: &str, payload: Arc<P>) -> Result<PushOutcome, NodeError> {
        let Some(binding) = self.outputs.get_mut(port) else {
            return Ok(PushOutcome::Rejected);
        };
        let packet = Packet::from_shared(payload, self.now, binding.next_seq);
        binding.next_seq += 1;
        let outcome = binding.stream.push(packet);
        if let PushOutcome::DroppedOldest {
            evicted_seq,
            successive,
        } = outcome
        {
            self.log.push(LogEvent::Dropped {
                at: self.now,
                stream: binding.stream.id().to_string(),
                seq: evicted_seq,
                successive,
            });
        }
        if outcome != PushOutcome::Rejected {
            self.pushes += 1;
            if let Some(c) = binding.consumer {
                self.touched.push(c);
            }
        }
        Ok(outcome)
    }

    pub fn note(&self, tag: &str, detail: serde_json::Value) {
        self.log.push(LogEvent::Note {
            at: self.now,
            node: self.node_id.to_string(),
            tag: tag.to_string(),
            detail,
        });
    }
}

/// Applies every queued control bit stamped at or before `upto`.
pub(crate) fn apply_controls<P: PacketData>(
    lb: &LatchBinding<P>,
    latch: &mut Latch,
    upto: Timestamp,
    now: Timestamp,
    log: &EventLog,
) {
    while let Some(c) = lb.control.pop_if(now, |c| c.timestamp() <= upto) {
        // a non-bit payload on a control stream keeps the gate shut
        let bit = c.payload().as_bit().unwrap_or(false);
        let before = latch.transitions().len();
        latch.apply_control(c.timestamp(), bit);
        for t in &latch.transitions()[before..] {
            log.push(LogEvent::LatchTransition {
                at: t.at,
                stream: lb.stream_id.clone(),
                state: t.state,
            });
        }
    }
}
