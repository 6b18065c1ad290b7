use std::collections::BTreeMap;

use latchflow::flowcore::{
    GraphDef, LatchTransition, LogEvent, RunReport, RunStatus, StreamCounters, Timestamp, Violation, SKILL_INVOKED,
};
use latchflow::robotics::ScanPoint;
use latchflow::skills::Entities;
use serde::{Deserialize, Serialize};

use crate::nodes::{tags, LedState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillInvocationRecord {
    pub at: Timestamp,
    pub skill_id: String,
    pub entities: Entities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretationRecord {
    pub at: Timestamp,
    pub window: u64,
    pub skill_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechRecord {
    pub at: Timestamp,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedRecord {
    pub at: Timestamp,
    pub state: LedState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatchSummary {
    pub control_stream_id: String,
    pub forwarded: u64,
    pub suppressed: u64,
    pub openings: usize,
    pub transitions: Vec<LatchTransition>,
}

/// Window flow through the gate. Once drained, `emitted == delivered + suppressed`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowFlow {
    pub emitted: u64,
    pub delivered: u64,
    pub suppressed: u64,
}

impl WindowFlow {
    pub fn conserved(&self) -> bool {
        self.emitted == self.delivered + self.suppressed
    }
}

/// Serialized outcome of one scenario run. Every map is ordered and every
/// time is virtual, so equal inputs give byte-equal JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReportFile {
    pub status: RunStatus,
    pub seed: u64,
    pub end_time: Timestamp,
    pub streams: BTreeMap<String, StreamCounters>,
    pub violations: BTreeMap<String, Vec<Violation>>,
    pub skill_invocations: Vec<SkillInvocationRecord>,
    pub latches: BTreeMap<String, LatchSummary>,
    pub windows: WindowFlow,
    pub interpretations: Vec<InterpretationRecord>,
    pub speaker_log: Vec<SpeechRecord>,
    pub led_states: Vec<LedRecord>,
    pub uart_bytes: Vec<u8>,
    pub dead_letters: u64,
    pub detector_errors: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacle_scan: Vec<ScanPoint>,
    pub event_log: Vec<LogEvent>,
}

fn field<'a>(detail: &'a serde_json::Value, key: &str) -> &'a serde_json::Value {
    detail.get(key).unwrap_or(&serde_json::Value::Null)
}

impl RunReportFile {
    /// Distils an executor report. `graph` identifies the window streams: the
    /// output of every `aggregator` node and the latched input of every
    /// `interpreter` node.
    pub fn from_run(graph: &GraphDef, run: RunReport, seed: u64) -> Self {
        let kind_of = |node: &str| graph.node(node).map(|n| n.kind.as_str());
        let streams: BTreeMap<_, _> = run.streams.iter().map(|s| (s.id.clone(), s.counters)).collect();

        let mut windows = WindowFlow::default();
        for s in &graph.streams {
            if kind_of(&s.from_node) == Some("aggregator") {
                windows.emitted += streams.get(&s.id).map_or(0, |c| c.pushed);
            }
        }
        let mut latches = BTreeMap::new();
        for l in &run.latches {
            let into_interpreter = graph
                .stream(&l.stream_id)
                .and_then(|s| s.to_node.as_deref())
                .is_some_and(|n| kind_of(n) == Some("interpreter"));
            if into_interpreter {
                windows.delivered += l.forwarded;
                windows.suppressed += l.suppressed;
            }
            latches.insert(
                l.stream_id.clone(),
                LatchSummary {
                    control_stream_id: l.control_stream_id.clone(),
                    forwarded: l.forwarded,
                    suppressed: l.suppressed,
                    openings: l.openings,
                    transitions: l.transitions.clone(),
                },
            );
        }

        let mut report = RunReportFile {
            status: run.status,
            seed,
            end_time: run.end_time,
            streams,
            violations: run
                .violations
                .into_iter()
                .map(|w| (w.stream_id, w.violations))
                .collect(),
            skill_invocations: Vec::new(),
            latches,
            windows,
            interpretations: Vec::new(),
            speaker_log: Vec::new(),
            led_states: Vec::new(),
            uart_bytes: Vec::new(),
            dead_letters: 0,
            detector_errors: 0,
            obstacle_scan: Vec::new(),
            event_log: Vec::new(),
        };
        for e in &run.event_log {
            let LogEvent::Note { at, tag, detail, .. } = e else {
                continue;
            };
            let at = *at;
            match tag.as_str() {
                SKILL_INVOKED => report.skill_invocations.push(SkillInvocationRecord {
                    at,
                    skill_id: field(detail, "skill_id").as_str().unwrap_or_default().to_string(),
                    entities: serde_json::from_value(field(detail, "entities").clone()).unwrap_or_default(),
                }),
                tags::INTERPRETATION => report.interpretations.push(InterpretationRecord {
                    at,
                    window: field(detail, "window").as_u64().unwrap_or_default(),
                    skill_id: field(detail, "skill_id").as_str().unwrap_or_default().to_string(),
                }),
                tags::SPEAK => report.speaker_log.push(SpeechRecord {
                    at,
                    text: field(detail, "text").as_str().unwrap_or_default().to_string(),
                }),
                tags::LED => {
                    if let Ok(state) = serde_json::from_value(field(detail, "state").clone()) {
                        report.led_states.push(LedRecord { at, state });
                    }
                }
                tags::UART_TX => {
                    if let Ok(bytes) = serde_json::from_value::<Vec<u8>>(field(detail, "bytes").clone()) {
                        report.uart_bytes.extend(bytes);
                    }
                }
                tags::DEAD_LETTER => report.dead_letters += 1,
                tags::DETECTOR_ERROR => report.detector_errors += 1,
                _ => {}
            }
        }
        report.event_log = run.event_log;
        report
    }

    pub fn invocations_of(&self, skill_id: &str) -> usize {
        self.skill_invocations.iter().filter(|s| s.skill_id == skill_id).count()
    }

    pub fn latch_openings(&self) -> usize {
        self.latches.values().map(|l| l.openings).sum()
    }

    pub fn is_completed(&self) -> bool {
        matches!(self.status, RunStatus::Completed { .. })
    }

    /// Every stream satisfies pushed = delivered + dropped + queued.
    pub fn counters_conserved(&self) -> bool {
        self.streams
            .values()
            .all(|c| c.pushed == c.delivered + c.dropped + c.queued)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}
