//! Graph execution.
//!
//! [`run_virtual`] is a single-threaded discrete-event loop over a
//! [`VirtualClock`]: nodes run in (time, topological rank) order, so a run is
//! fully deterministic. [`run_threaded`] gives every node its own worker
//! thread and a real clock; counters match the virtual run for graphs whose
//! outcome does not depend on cross-thread timing.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicU8, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::graph::{validate, Diagnostic, GraphDef, NodeCatalog};
use super::node::{
    apply_controls, EventLog, InputBinding, LatchBinding, LogEvent, Node, NodeContext, NodeError,
    OutputBinding, Wake, SKILL_INVOKED,
};
use super::watchdog::WatchdogReport;
use super::{
    Clock, Latch, LatchTransition, PacketData, Stream, StreamCounters, Timestamp, VirtualClock,
    Watchdog,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopCondition {
    pub time_limit: Option<Timestamp>,
    /// Stop once this many packets have been pushed across all streams.
    pub packet_budget: Option<u64>,
}

impl StopCondition {
    pub fn until(t: Timestamp) -> Self {
        Self {
            time_limit: Some(t),
            packet_budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Nothing left to do: sources exhausted and all queues drained.
    Quiescent,
    TimeLimit,
    PacketBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed { reason: StopReason },
    Failed { node: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamReport {
    pub id: String,
    #[serde(flatten)]
    pub counters: StreamCounters,
    pub monitor_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatchReport {
    pub stream_id: String,
    pub control_stream_id: String,
    pub forwarded: u64,
    pub suppressed: u64,
    pub openings: usize,
    pub transitions: Vec<LatchTransition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub end_time: Timestamp,
    /// Per-stream counters in definition order.
    pub streams: Vec<StreamReport>,
    pub latches: Vec<LatchReport>,
    /// Streams with at least one violation.
    pub violations: Vec<WatchdogReport>,
    pub skill_invocations: u64,
    pub event_log: Vec<LogEvent>,
}

impl RunReport {
    pub fn stream(&self, id: &str) -> Option<&StreamReport> {
        self.streams.iter().find(|s| s.id == id)
    }

    pub fn delivered(&self, id: &str) -> u64 {
        self.stream(id).map_or(0, |s| s.counters.delivered)
    }

    pub fn total_drops(&self) -> u64 {
        self.streams.iter().map(|s| s.counters.dropped).sum()
    }

    pub fn latch(&self, stream_id: &str) -> Option<&LatchReport> {
        self.latches.iter().find(|l| l.stream_id == stream_id)
    }

    pub fn failed_node(&self) -> Option<&str> {
        match &self.status {
            RunStatus::Failed { node, .. } => Some(node),
            RunStatus::Completed { .. } => None,
        }
    }

    pub fn notes<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a LogEvent> + 'a {
        self.event_log
            .iter()
            .filter(move |e| matches!(e, LogEvent::Note { tag: t, .. } if t == tag))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("graph is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("cannot build node `{node}`: {reason}")]
    Build { node: String, reason: String },
}

struct Built<P> {
    ids: Vec<String>,
    nodes: Vec<Box<dyn Node<P>>>,
    ranks: Vec<usize>,
    inputs: Vec<BTreeMap<String, InputBinding<P>>>,
    outputs: Vec<BTreeMap<String, OutputBinding<P>>>,
    streams: Vec<Arc<Stream<P>>>,
    latches: Vec<LatchBinding<P>>,
    control_ids: Vec<String>,
}

fn build<P: PacketData>(def: &GraphDef, catalog: &NodeCatalog<P>) -> Result<Built<P>, RunError> {
    let diags = validate(def, catalog);
    if !diags.is_empty() {
        return Err(RunError::Invalid(diags));
    }

    let index: BTreeMap<&str, usize> = def
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();

    let mut nodes = Vec::with_capacity(def.nodes.len());
    for n in &def.nodes {
        let kind = catalog.get(&n.kind).expect("validated");
        let node = kind.build(n).map_err(|reason| RunError::Build {
            node: n.id.clone(),
            reason,
        })?;
        nodes.push(node);
    }

    let mut streams = Vec::with_capacity(def.streams.len());
    let mut by_id = BTreeMap::new();
    for s in &def.streams {
        let mut stream = Stream::new(s.id.clone(), s.policy.clone()).expect("validated");
        if let Some(cfg) = &s.watchdog {
            stream = stream.with_watchdog(Watchdog::new(cfg.clone()).expect("validated"));
        }
        let stream = Arc::new(stream);
        by_id.insert(s.id.as_str(), Arc::clone(&stream));
        streams.push(stream);
    }

    let mut latch_of: BTreeMap<&str, LatchBinding<P>> = BTreeMap::new();
    let mut latches = Vec::new();
    let mut control_ids = Vec::new();
    for l in &def.latches {
        let binding = LatchBinding {
            stream_id: l.stream_id.clone(),
            latch: Arc::new(Mutex::new(Latch::new(l.initial_state))),
            control: Arc::clone(&by_id[l.control_stream_id.as_str()]),
        };
        latches.push(LatchBinding {
            stream_id: binding.stream_id.clone(),
            latch: Arc::clone(&binding.latch),
            control: Arc::clone(&binding.control),
        });
        control_ids.push(l.control_stream_id.clone());
        latch_of.insert(l.stream_id.as_str(), binding);
    }

    let n = def.nodes.len();
    let mut inputs: Vec<BTreeMap<String, InputBinding<P>>> = (0..n).map(|_| BTreeMap::new()).collect();
    let mut outputs: Vec<BTreeMap<String, OutputBinding<P>>> = (0..n).map(|_| BTreeMap::new()).collect();
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); n];

    for s in &def.streams {
        let from = index[s.from_node.as_str()];
        let to = s.to_node.as_deref().map(|t| index[t]);
        outputs[from].insert(
            s.from_port.clone(),
            OutputBinding {
                stream: Arc::clone(&by_id[s.id.as_str()]),
                next_seq: 0,
                consumer: to,
            },
        );
        if let (Some(to), Some(port)) = (to, &s.to_port) {
            inputs[to].insert(
                port.clone(),
                InputBinding {
                    stream: Arc::clone(&by_id[s.id.as_str()]),
                    latch: latch_of.remove(s.id.as_str()),
                },
            );
            edges[from].push(to);
        }
    }
    // a control producer must run before the consumer of the stream it gates
    for l in &def.latches {
        let control = def.stream(&l.control_stream_id).expect("validated");
        let data = def.stream(&l.stream_id).expect("validated");
        if let Some(to) = data.to_node.as_deref() {
            edges[index[control.from_node.as_str()]].push(index[to]);
        }
    }

    Ok(Built {
        ids: def.nodes.iter().map(|n| n.id.clone()).collect(),
        nodes,
        ranks: topo_ranks(&edges),
        inputs,
        outputs,
        streams,
        latches,
        control_ids,
    })
}

/// Kahn's algorithm, lowest declaration index first; nodes on cycles keep
/// declaration order after everything else.
fn topo_ranks(edges: &[Vec<usize>]) -> Vec<usize> {
    let n = edges.len();
    let mut indeg = vec![0usize; n];
    for outs in edges {
        for &t in outs {
            indeg[t] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut rank = vec![usize::MAX; n];
    let mut next = 0;
    while let Some(Reverse(i)) = ready.pop() {
        rank[i] = next;
        next += 1;
        for &t in &edges[i] {
            indeg[t] -= 1;
            if indeg[t] == 0 {
                ready.push(Reverse(t));
            }
        }
    }
    for r in rank.iter_mut().filter(|r| **r == usize::MAX) {
        *r = next;
        next += 1;
    }
    rank
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| e.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".to_string())
}

fn call_node<P: PacketData>(
    node: &mut dyn Node<P>,
    ctx: &mut NodeContext<'_, P>,
    starting: bool,
) -> Result<Wake, String> {
    let r = catch_unwind(AssertUnwindSafe(|| {
        if starting {
            node.start(ctx)
        } else {
            node.wake(ctx)
        }
    }));
    match r {
        Ok(Ok(w)) => Ok(w),
        Ok(Err(NodeError(msg))) => Err(msg),
        Err(panic) => Err(format!("panicked: {}", panic_message(panic))),
    }
}

fn finish_report<P: PacketData>(
    built: &Built<P>,
    log: EventLog,
    status: RunStatus,
    end: Timestamp,
) -> RunReport {
    // settle control bits that never met a data packet so transitions are complete
    for lb in &built.latches {
        let mut latch = lb.latch.lock().unwrap_or_else(|e| e.into_inner());
        apply_controls(lb, &mut latch, Timestamp::from_micros(u64::MAX), end, &log);
    }
    for s in &built.streams {
        s.flush_watchdog(end);
        for v in s.take_new_violations() {
            log.push(LogEvent::Violation {
                stream: s.id().to_string(),
                violation: v,
            });
        }
    }

    let streams = built
        .streams
        .iter()
        .map(|s| StreamReport {
            id: s.id().to_string(),
            counters: s.counters(),
            monitor_errors: s.monitor_errors().len(),
        })
        .collect();
    let latches = built
        .latches
        .iter()
        .zip(&built.control_ids)
        .map(|(lb, control)| {
            let l = lb.latch.lock().unwrap_or_else(|e| e.into_inner());
            LatchReport {
                stream_id: lb.stream_id.clone(),
                control_stream_id: control.clone(),
                forwarded: l.forwarded(),
                suppressed: l.suppressed(),
                openings: l.openings(),
                transitions: l.transitions().to_vec(),
            }
        })
        .collect();
    let violations = built
        .streams
        .iter()
        .map(|s| WatchdogReport {
            stream_id: s.id().to_string(),
            violations: s.violations(),
        })
        .filter(|r| !r.violations.is_empty())
        .collect();
    let event_log = log.into_inner();
    let skill_invocations = event_log
        .iter()
        .filter(|e| matches!(e, LogEvent::Note { tag, .. } if tag == SKILL_INVOKED))
        .count() as u64;

    RunReport {
        status,
        end_time: end,
        streams,
        latches,
        violations,
        skill_invocations,
        event_log,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Input,
    Timer,
    InputOrTimer,
    Done,
}

/// Runs `def` to `stop` on a virtual clock. The same graph, clock start and
/// node seeds always produce an identical report, event log included.
pub fn run_virtual<P: PacketData>(
    def: &GraphDef,
    catalog: &NodeCatalog<P>,
    clock: &VirtualClock,
    stop: StopCondition,
) -> Result<RunReport, RunError> {
    let mut built = build(def, catalog)?;
    let n = built.nodes.len();
    let log = EventLog::default();
    let mut mode = vec![Mode::Input; n];
    let mut sched: Vec<Option<Timestamp>> = vec![None; n];
    let mut heap: BinaryHeap<Reverse<(Timestamp, usize, usize)>> = BinaryHeap::new();
    let mut pushes = 0u64;
    let mut status = RunStatus::Completed {
        reason: StopReason::Quiescent,
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| built.ranks[i]);

    let mut pending: Vec<(usize, bool)> = order.iter().map(|&i| (i, true)).collect();
    let mut end = clock.now();

    'run: loop {
        for (i, starting) in pending.drain(..) {
            let now = clock.now();
            let mut ctx = NodeContext {
                node_id: &built.ids[i],
                now,
                inputs: &built.inputs[i],
                outputs: &mut built.outputs[i],
                log: &log,
                touched: Vec::new(),
                pushes: 0,
            };
            let result = call_node(built.nodes[i].as_mut(), &mut ctx, starting);
            let touched = std::mem::take(&mut ctx.touched);
            pushes += ctx.pushes;
            for s in &built.streams {
                for v in s.take_new_violations() {
                    log.push(LogEvent::Violation {
                        stream: s.id().to_string(),
                        violation: v,
                    });
                }
            }
            end = now;

            let wake = match result {
                Ok(w) => w,
                Err(reason) => {
                    log.push(LogEvent::NodeFailed {
                        at: now,
                        node: built.ids[i].clone(),
                        reason: reason.clone(),
                    });
                    status = RunStatus::Failed {
                        node: built.ids[i].clone(),
                        reason,
                    };
                    break 'run;
                }
            };
            let (m, at) = match wake {
                Wake::Input => (Mode::Input, None),
                Wake::At(t) => (Mode::Timer, Some(t.max(now))),
                Wake::InputOrAt(t) => (Mode::InputOrTimer, Some(t.max(now))),
                Wake::Done => (Mode::Done, None),
            };
            mode[i] = m;
            sched[i] = at;
            if let Some(t) = at {
                heap.push(Reverse((t, built.ranks[i], i)));
            }

            for c in touched {
                if matches!(mode[c], Mode::Input | Mode::InputOrTimer)
                    && sched[c].is_none_or(|s| s > now)
                {
                    sched[c] = Some(now);
                    heap.push(Reverse((now, built.ranks[c], c)));
                }
            }

            if stop.packet_budget.is_some_and(|b| pushes >= b) {
                status = RunStatus::Completed {
                    reason: StopReason::PacketBudget,
                };
                break 'run;
            }
        }

        let Some(Reverse((t, _, i))) = heap.pop() else {
            break;
        };
        if sched[i] != Some(t) {
            continue;
        }
        if stop.time_limit.is_some_and(|limit| t > limit) {
            let limit = stop.time_limit.expect("checked");
            clock.advance_to(limit);
            end = limit;
            status = RunStatus::Completed {
                reason: StopReason::TimeLimit,
            };
            break;
        }
        sched[i] = None;
        clock.advance_to(t);
        pending.push((i, false));
    }

    Ok(finish_report(&built, log, status, end.max(clock.now())))
}

const IDLE: u8 = 0;
const RUNNING: u8 = 1;
const SLEEPING: u8 = 2;
const DONE: u8 = 3;

#[derive(Default)]
struct Waker {
    flag: Mutex<bool>,
    cv: Condvar,
}

impl Waker {
    fn notify(&self) {
        *self.flag.lock().unwrap_or_else(|e| e.into_inner()) = true;
        self.cv.notify_one();
    }

    fn wait(&self, timeout: Duration) -> bool {
        let guard = self.flag.lock().unwrap_or_else(|e| e.into_inner());
        let (mut guard, _) = self
            .cv
            .wait_timeout_while(guard, timeout, |f| !*f)
            .unwrap_or_else(|e| e.into_inner());
        std::mem::replace(&mut *guard, false)
    }
}

struct Shared {
    stop: AtomicBool,
    pushes: AtomicU64,
    epoch: AtomicU64,
    states: Vec<AtomicU8>,
    wakers: Vec<Waker>,
    failure: Mutex<Option<(String, String)>>,
}

/// Runs `def` with one worker thread per node against a real clock.
///
/// Intended for soak testing. Event order depends on scheduling; use
/// [`run_virtual`] wherever reproducibility matters.
pub fn run_threaded<P: PacketData>(
    def: &GraphDef,
    catalog: &NodeCatalog<P>,
    clock: Arc<dyn Clock>,
    stop: StopCondition,
) -> Result<RunReport, RunError> {
    let mut built = build(def, catalog)?;
    let n = built.nodes.len();
    let log = EventLog::default();
    let shared = Shared {
        stop: AtomicBool::new(false),
        pushes: AtomicU64::new(0),
        epoch: AtomicU64::new(0),
        states: (0..n).map(|_| AtomicU8::new(RUNNING)).collect(),
        wakers: (0..n).map(|_| Waker::default()).collect(),
        failure: Mutex::new(None),
    };
    let poll = Duration::from_millis(2);
    let consumed: Vec<Arc<Stream<P>>> = built
        .inputs
        .iter()
        .flat_map(|m| m.values().map(|b| Arc::clone(&b.stream)))
        .collect();

    let mut reason = StopReason::Quiescent;
    std::thread::scope(|scope| {
        for (i, ((node, inputs), outputs)) in built
            .nodes
            .iter_mut()
            .zip(&built.inputs)
            .zip(built.outputs.iter_mut())
            .enumerate()
        {
            let shared = &shared;
            let log = &log;
            let clock = Arc::clone(&clock);
            let id = built.ids[i].as_str();
            scope.spawn(move || {
                let mut starting = true;
                let mut wake = Wake::Input;
                loop {
                    if !starting {
                        match wake {
                            Wake::Done => break,
                            Wake::Input => {
                                shared.states[i].store(IDLE, Ordering::SeqCst);
                                let notified = shared.wakers[i].wait(poll);
                                if !notified && !inputs.values().any(|b| !b.stream.is_empty()) {
                                    if shared.stop.load(Ordering::SeqCst) {
                                        break;
                                    }
                                    continue;
                                }
                            }
                            Wake::At(t) | Wake::InputOrAt(t) => {
                                shared.states[i].store(SLEEPING, Ordering::SeqCst);
                                let mut woke = false;
                                while clock.now() < t && !shared.stop.load(Ordering::SeqCst) {
                                    if matches!(wake, Wake::InputOrAt(_)) && shared.wakers[i].wait(poll) {
                                        woke = true;
                                        break;
                                    }
                                    if matches!(wake, Wake::At(_)) {
                                        std::thread::sleep(poll.min(Duration::from_micros(200)));
                                    }
                                }
                                let _ = woke;
                            }
                        }
                    }
                    if shared.stop.load(Ordering::SeqCst) {
                        break;
                    }
                    shared.states[i].store(RUNNING, Ordering::SeqCst);
                    shared.epoch.fetch_add(1, Ordering::SeqCst);
                    let mut ctx = NodeContext {
                        node_id: id,
                        now: clock.now(),
                        inputs,
                        outputs,
                        log,
                        touched: Vec::new(),
                        pushes: 0,
                    };
                    let result = call_node(node.as_mut(), &mut ctx, starting);
                    starting = false;
                    if ctx.pushes > 0 {
                        shared.pushes.fetch_add(ctx.pushes, Ordering::SeqCst);
                        shared.epoch.fetch_add(1, Ordering::SeqCst);
                    }
                    for c in std::mem::take(&mut ctx.touched) {
                        shared.wakers[c].notify();
                    }
                    match result {
                        Ok(w) => wake = w,
                        Err(reason) => {
                            log.push(LogEvent::NodeFailed {
                                at: clock.now(),
                                node: id.to_string(),
                                reason: reason.clone(),
                            });
                            *shared.failure.lock().unwrap_or_else(|e| e.into_inner()) =
                                Some((id.to_string(), reason));
                            shared.stop.store(true, Ordering::SeqCst);
                            break;
                        }
                    }
                }
                shared.states[i].store(DONE, Ordering::SeqCst);
            });
        }

        loop {
            std::thread::sleep(Duration::from_millis(1));
            if shared.stop.load(Ordering::SeqCst) {
                break;
            }
            if stop.time_limit.is_some_and(|l| clock.now() >= l) {
                reason = StopReason::TimeLimit;
                break;
            }
            if stop
                .packet_budget
                .is_some_and(|b| shared.pushes.load(Ordering::SeqCst) >= b)
            {
                reason = StopReason::PacketBudget;
                break;
            }
            let e1 = shared.epoch.load(Ordering::SeqCst);
            let drained = consumed.iter().all(|s| s.is_empty());
            let idle = shared
                .states
                .iter()
                .all(|s| matches!(s.load(Ordering::SeqCst), IDLE | DONE));
            let e2 = shared.epoch.load(Ordering::SeqCst);
            if drained && idle && e1 == e2 {
                break;
            }
        }
        shared.stop.store(true, Ordering::SeqCst);
        for w in &shared.wakers {
            w.notify();
        }
    });

    let status = match shared.failure.into_inner().unwrap_or_else(|e| e.into_inner()) {
        Some((node, reason)) => RunStatus::Failed { node, reason },
        None => RunStatus::Completed { reason },
    };
    let end = clock.now();
    Ok(finish_report(&built, log, status, end))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topo_prefers_declaration_order() {
        // 0 -> 2, 1 -> 2, 2 -> 3
        let edges = vec![vec![2], vec![2], vec![3], vec![]];
        assert_eq!(topo_ranks(&edges), vec![0, 1, 2, 3]);
        // 1 -> 0
        let edges = vec![vec![], vec![0]];
        assert_eq!(topo_ranks(&edges), vec![1, 0]);
    }

    #[test]
    fn topo_cycle_falls_back() {
        let edges = vec![vec![1], vec![0], vec![]];
        let r = topo_ranks(&edges);
        assert_eq!(r[2], 0);
        assert!(r[0] < r[1]);
    }
}
