//! Dataflow graph runtime.

mod aggregator;
mod attention;
mod clock;
pub mod exec;
pub mod graph;
mod latch;
pub mod node;
pub mod nodes;
mod packet;
mod stream;
mod watchdog;

pub use aggregator::{Aggregator, AggregatorConfig, AggregatorError, SampleWindow};
pub use attention::{attention_decide, AttentionNode, ConstantDetector, Decision, Detector, DetectorError};
pub use clock::{Clock, MonotonicClock, VirtualClock};
pub use exec::{
    run_threaded, run_virtual, LatchReport, RunError, RunReport, RunStatus, StopCondition, StopReason,
    StreamReport,
};
pub use graph::{
    validate, Diagnostic, GraphDef, LatchDef, NodeCatalog, NodeDef, NodeKind, PortDirection, PortSpec, Ports,
    SchemaError, StreamDef,
};
pub use latch::{Gate, Latch, LatchState, LatchTransition};
pub use node::{EventLog, LogEvent, Node, NodeContext, NodeError, Wake, SKILL_INVOKED};
pub use packet::{Packet, PacketData, Timestamp, Value};
pub use stream::{PolicyError, PushOutcome, Stream, StreamCounters, StreamPolicy};
pub use watchdog::{
    MonitorError, Violation, ViolationKind, WatchEvent, Watchdog, WatchdogConfig, WatchdogConfigError,
    WatchdogReport,
};
