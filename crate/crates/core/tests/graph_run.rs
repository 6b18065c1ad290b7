use std::sync::Arc;

use latchflow::flowcore::{
    run_threaded, run_virtual, validate, Diagnostic, GraphDef, LatchState, LogEvent, MonotonicClock,
    NodeCatalog, NodeContext, NodeDef, NodeError, NodeKind, PortSpec, Ports, RunError, RunStatus,
    StopCondition, StopReason, Timestamp, Value, VirtualClock, Wake,
};
use latchflow::flowcore::Node;
use serde_json::json;

fn catalog() -> NodeCatalog<Value> {
    NodeCatalog::with_builtins()
}

fn graph(v: serde_json::Value) -> GraphDef {
    GraphDef::from_json(&v.to_string()).unwrap()
}

fn source_sink(count: u64, rate: f64, policy: serde_json::Value, sink: serde_json::Value) -> GraphDef {
    graph(json!({
        "nodes": [
            {"id": "src", "kind": "source", "params": {"count": count, "rate_hz": rate}},
            {"id": "dst", "kind": "sink", "params": sink}
        ],
        "streams": [
            {"id": "s", "from_node": "src", "from_port": "out", "to_node": "dst", "to_port": "in", "policy": policy}
        ]
    }))
}

fn run(def: &GraphDef, limit_s: f64) -> latchflow::flowcore::RunReport {
    run_virtual(
        def,
        &catalog(),
        &VirtualClock::new(),
        StopCondition::until(Timestamp::from_secs_f64(limit_s)),
    )
    .unwrap()
}

#[test]
fn empty_graph_reports_zero() {
    let r = run(&GraphDef::default(), 1.0);
    assert!(r.streams.is_empty());
    assert_eq!(r.total_drops(), 0);
    assert_eq!(r.skill_invocations, 0);
    assert_eq!(
        r.status,
        RunStatus::Completed {
            reason: StopReason::Quiescent
        }
    );
}

#[test]
fn lossless_source_to_sink_conserves() {
    let def = source_sink(100, 1000.0, json!({"kind": "lossless", "deadline_us": 1000}), json!({}));
    let r = run(&def, 10.0);
    let s = r.stream("s").unwrap();
    assert_eq!(s.counters.pushed, 100);
    assert_eq!(s.counters.delivered, 100);
    assert_eq!(s.counters.dropped, 0);
    assert!(r.violations.is_empty());
}

#[test]
fn lossy_slow_sink_literal_rates() {
    // 100 packets inside the first 99 ms; the sink takes one at 0 ms and one at 100 ms.
    let def = source_sink(
        100,
        1000.0,
        json!({"kind": "lossy", "capacity": 1, "max_successive_misses": 100}),
        json!({"rate_hz": 10.0}),
    );
    let r = run(&def, 1.0);
    let c = r.stream("s").unwrap().counters;
    assert_eq!((c.delivered, c.dropped, c.queued), (2, 98, 0));
    assert_eq!(c.delivered + c.dropped, 100);
    assert_eq!(c.max_queued, 1);
}

#[test]
fn lossy_slow_sink_paced_source() {
    // Source spread over the whole second; the sink serves at 0, 100, ..., 1000 ms (limit inclusive).
    let def = source_sink(
        100,
        100.0,
        json!({"kind": "lossy", "capacity": 1, "max_successive_misses": 100}),
        json!({"rate_hz": 10.0}),
    );
    let r = run(&def, 1.0);
    let c = r.stream("s").unwrap().counters;
    assert_eq!(c.delivered, 11);
    assert_eq!(c.dropped, 89);
    assert_eq!(c.pushed, c.delivered + c.dropped + c.queued);
}

#[test]
fn miss_limit_is_reported_once_per_burst() {
    let def = source_sink(
        50,
        1000.0,
        json!({"kind": "lossy", "capacity": 1, "max_successive_misses": 2}),
        json!({"rate_hz": 10.0}),
    );
    let r = run(&def, 1.0);
    assert_eq!(r.violations.len(), 1);
    assert!(!r.violations[0].violations.is_empty());
    let drops = r
        .event_log
        .iter()
        .filter(|e| matches!(e, LogEvent::Dropped { .. }))
        .count() as u64;
    assert_eq!(drops, r.total_drops());
}

#[test]
fn packet_budget_stops_early() {
    let def = source_sink(100, 1000.0, json!({"kind": "lossless", "deadline_us": 1000}), json!({}));
    let r = run_virtual(
        &def,
        &catalog(),
        &VirtualClock::new(),
        StopCondition {
            time_limit: None,
            packet_budget: Some(10),
        },
    )
    .unwrap();
    assert_eq!(
        r.status,
        RunStatus::Completed {
            reason: StopReason::PacketBudget
        }
    );
    assert_eq!(r.stream("s").unwrap().counters.pushed, 10);
}

#[test]
fn time_limit_stops_source() {
    let def = source_sink(100, 100.0, json!({"kind": "lossless", "deadline_us": 1000}), json!({}));
    let r = run(&def, 0.25);
    assert_eq!(
        r.status,
        RunStatus::Completed {
            reason: StopReason::TimeLimit
        }
    );
    // packets at 0, 10, ..., 250 ms
    assert_eq!(r.stream("s").unwrap().counters.pushed, 26);
    assert_eq!(r.end_time, Timestamp::from_millis(250));
}

fn gated(bits: &[u8]) -> GraphDef {
    graph(json!({
        "nodes": [
            {"id": "src", "kind": "source", "params": {"count": 9, "rate_hz": 100.0}},
            {"id": "kws", "kind": "bit_source", "params": {"bits": bits, "rate_hz": 1e6 / 30_000.0}},
            {"id": "dst", "kind": "sink"}
        ],
        "streams": [
            {"id": "data", "from_node": "src", "from_port": "out", "to_node": "dst", "to_port": "in",
             "policy": {"kind": "lossless", "deadline_us": 1_000_000}},
            {"id": "ctrl", "from_node": "kws", "from_port": "bits",
             "policy": {"kind": "lossless", "deadline_us": 1_000_000}}
        ],
        "latches": [{"stream_id": "data", "control_stream_id": "ctrl"}]
    }))
}

#[test]
fn latch_replay_1_0_1() {
    let r = run(&gated(&[1, 0, 1]), 1.0);
    let l = r.latch("data").unwrap();
    assert_eq!((l.forwarded, l.suppressed), (6, 3));
    assert_eq!(l.openings, 2);
    assert_eq!(r.delivered("data"), 9);
    let states: Vec<_> = l.transitions.iter().map(|t| (t.at.as_micros(), t.state)).collect();
    assert_eq!(
        states,
        vec![
            (0, LatchState::Open),
            (30_000, LatchState::Closed),
            (60_000, LatchState::Open)
        ]
    );
}

#[test]
fn closed_latch_never_forwards() {
    let r = run(&gated(&[0, 0, 0]), 1.0);
    let l = r.latch("data").unwrap();
    assert_eq!((l.forwarded, l.suppressed, l.openings), (0, 9, 0));
}

#[test]
fn event_log_is_deterministic() {
    let def = gated(&[1, 0, 1]);
    let a = serde_json::to_string(&run(&def, 1.0)).unwrap();
    let b = serde_json::to_string(&run(&def, 1.0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn splitter_fans_out() {
    let def = graph(json!({
        "nodes": [
            {"id": "src", "kind": "source", "params": {"count": 5, "rate_hz": 100.0}},
            {"id": "split", "kind": "splitter", "params": {"outputs": 2}},
            {"id": "a", "kind": "sink"},
            {"id": "b", "kind": "sink"}
        ],
        "streams": [
            {"id": "in", "from_node": "src", "from_port": "out", "to_node": "split", "to_port": "in",
             "policy": {"kind": "lossless", "deadline_us": 1000}},
            {"id": "x", "from_node": "split", "from_port": "out0", "to_node": "a", "to_port": "in",
             "policy": {"kind": "lossless", "deadline_us": 1000}},
            {"id": "y", "from_node": "split", "from_port": "out1", "to_node": "b", "to_port": "in",
             "policy": {"kind": "lossless", "deadline_us": 1000}}
        ]
    }));
    let r = run(&def, 1.0);
    assert_eq!(r.delivered("x"), 5);
    assert_eq!(r.delivered("y"), 5);
}

struct Boom;
struct BoomNode(u32);

impl NodeKind<Value> for Boom {
    fn ports(&self, _: &serde_json::Value) -> Result<Ports, String> {
        Ok(Ports::new(vec![PortSpec::required("in")], vec![]))
    }
    fn build(&self, _: &NodeDef) -> Result<Box<dyn Node<Value>>, String> {
        Ok(Box::new(BoomNode(0)))
    }
}

impl Node<Value> for BoomNode {
    fn wake(&mut self, ctx: &mut NodeContext<'_, Value>) -> Result<Wake, NodeError> {
        while ctx.pop("in")?.is_some() {
            self.0 += 1;
            if self.0 == 3 {
                panic!("third packet");
            }
        }
        Ok(Wake::Input)
    }
}

#[test]
fn node_panic_halts_with_partial_report() {
    let mut cat = catalog();
    cat.register("boom", Boom);
    let def = graph(json!({
        "nodes": [
            {"id": "src", "kind": "source", "params": {"count": 10, "rate_hz": 100.0}},
            {"id": "x", "kind": "boom"}
        ],
        "streams": [
            {"id": "s", "from_node": "src", "from_port": "out", "to_node": "x", "to_port": "in",
             "policy": {"kind": "lossless", "deadline_us": 1000}}
        ]
    }));
    let r = run_virtual(&def, &cat, &VirtualClock::new(), StopCondition::default()).unwrap();
    assert_eq!(r.failed_node(), Some("x"));
    let c = r.stream("s").unwrap().counters;
    assert_eq!(c.delivered, 3);
    assert_eq!(c.pushed, c.delivered + c.dropped + c.queued);
    assert!(r
        .event_log
        .iter()
        .any(|e| matches!(e, LogEvent::NodeFailed { node, .. } if node == "x")));
}

#[test]
fn invalid_graph_is_refused() {
    let def = graph(json!({
        "nodes": [{"id": "a", "kind": "sink"}],
        "streams": [
            {"id": "s", "from_node": "xyz", "from_port": "out", "to_node": "a", "to_port": "in",
             "policy": {"kind": "lossless", "deadline_us": 1000}}
        ]
    }));
    let diags = validate(&def, &catalog());
    assert_eq!(diags, vec![Diagnostic::UnresolvedEndpoint("xyz".into())]);
    let err = run_virtual(&def, &catalog(), &VirtualClock::new(), StopCondition::default()).unwrap_err();
    assert!(matches!(err, RunError::Invalid(_)));
}

#[test]
fn threaded_matches_virtual_counters() {
    let def = source_sink(200, 20_000.0, json!({"kind": "lossless", "deadline_us": 1_000_000}), json!({}));
    let clock = Arc::new(MonotonicClock::new());
    let r = run_threaded(&def, &catalog(), clock, StopCondition::until(Timestamp::from_secs_f64(5.0))).unwrap();
    let v = run(&def, 5.0);
    assert_eq!(r.stream("s").unwrap().counters.pushed, v.stream("s").unwrap().counters.pushed);
    assert_eq!(r.delivered("s"), v.delivered("s"));
    assert_eq!(r.total_drops(), 0);
    assert_eq!(
        r.status,
        RunStatus::Completed {
            reason: StopReason::Quiescent
        }
    );
}

#[test]
fn threaded_latch_counts_match() {
    let def = gated(&[1, 0, 1]);
    let v = run(&def, 1.0);
    let r = run_threaded(
        &def,
        &catalog(),
        Arc::new(MonotonicClock::new()),
        StopCondition::until(Timestamp::from_secs_f64(5.0)),
    )
    .unwrap();
    let (lv, lr) = (v.latch("data").unwrap(), r.latch("data").unwrap());
    assert_eq!(lr.forwarded + lr.suppressed, lv.forwarded + lv.suppressed);
    assert_eq!(r.delivered("data"), 9);
}
