//! Node kinds of the reference speech pipeline: simulated devices, the I/O
//! manager, window aggregation, attention, a scripted semantic interpreter,
//! the skill manager and the simulated speaker and UART outputs.
//!
//! Every kind reads its scenario inputs from a shared [`ScenarioData`]; all
//! observable output goes to the run's event log as notes, so reports are a
//! pure function of the graph, the scenario and the seed.

use std::collections::BTreeMap;
use std::sync::Arc;

use latchflow::dsp::{rms_detect, AudioBuffer};
use latchflow::flowcore::{
    attention_decide, Aggregator, AggregatorConfig, ConstantDetector, Detector, DetectorError, Node, NodeCatalog,
    NodeContext, NodeDef, NodeError, NodeKind, PortSpec, Ports, SampleWindow, Timestamp, Wake, SKILL_INVOKED,
};
use latchflow::robotics::{encode_locomotion, frame_uart, uart_transfer_time_s, DEFAULT_BAUD};
use latchflow::skills::{
    register_demo_skills, Action, Effect, Interpretation, ManagerConfig, SkillExecutor, SkillManager, SkillRegistry,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::routing::{IoManager, RoutingTable};
use crate::scenario::{Annotation, ScenarioScript, ScriptedIntent};
use crate::signal::{AudioChunk, Signal};

/// Note tags written by the harness nodes.
pub mod tags {
    pub const DEAD_LETTER: &str = "dead_letter";
    pub const DETECTOR_ERROR: &str = "detector_error";
    pub const INTERPRETATION: &str = "interpretation";
    pub const SPEAK: &str = "speak";
    pub const NOTIFY: &str = "notify";
    pub const LED: &str = "led";
    pub const UART_TX: &str = "uart_tx";
    pub const ACTION: &str = "skill_action";
    pub const SKILL_FAILED: &str = "skill_failed";
}

/// Scenario inputs shared by every node of one run.
#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub audio: Arc<AudioBuffer>,
    pub annotations: Arc<[Annotation]>,
    pub script: Arc<BTreeMap<u64, ScriptedIntent>>,
}

impl ScenarioData {
    pub fn new(audio: AudioBuffer, scenario: &ScenarioScript) -> Self {
        Self {
            audio: Arc::new(audio),
            annotations: scenario.annotations.clone().into(),
            script: Arc::new(
                scenario
                    .interpreter_script
                    .iter()
                    .map(|s| (s.trigger_window_index, s.interpretation.clone()))
                    .collect(),
            ),
        }
    }

    /// No audio and no scripts; useful for validating graphs.
    pub fn empty() -> Self {
        Self {
            audio: Arc::new(AudioBuffer::new(Vec::new(), crate::scenario::PIPELINE_RATE_HZ)),
            annotations: Vec::new().into(),
            script: Arc::new(BTreeMap::new()),
        }
    }
}

fn parse<T: DeserializeOwned>(params: &serde_json::Value) -> Result<T, String> {
    let v = if params.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        params.clone()
    };
    serde_json::from_value(v).map_err(|e| e.to_string())
}

fn payload_err(node: &str, want: &str, got: &Signal) -> NodeError {
    NodeError::new(format!("{node}: expected {want}, got {}", got.kind()))
}

// ---------------------------------------------------------------- audio source

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AudioSourceParams {
    #[serde(default = "default_device")]
    device: String,
    #[serde(default = "default_chunk_ms")]
    chunk_ms: u32,
}

fn default_device() -> String {
    "mic0".into()
}

fn default_chunk_ms() -> u32 {
    10
}

/// Plays the scenario audio as fixed-size chunks, each emitted at the time
/// its last sample was captured.
pub struct AudioSourceKind(pub ScenarioData);

struct AudioSource {
    device: String,
    audio: Arc<AudioBuffer>,
    chunk: usize,
    next: usize,
}

impl AudioSource {
    fn due(&self) -> Option<Timestamp> {
        let n = self.audio.len();
        (self.next < n).then(|| {
            let end = (self.next + self.chunk).min(n);
            Timestamp::from_micros(end as u64 * 1_000_000 / self.audio.sample_rate_hz as u64)
        })
    }

    fn schedule(&self) -> Wake {
        self.due().map_or(Wake::Done, Wake::At)
    }
}

impl NodeKind<Signal> for AudioSourceKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        let p: AudioSourceParams = parse(params)?;
        if p.chunk_ms == 0 {
            return Err("chunk_ms must be positive".into());
        }
        Ok(Ports::new(vec![], vec![PortSpec::required("out")]))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<Signal>>, String> {
        let p: AudioSourceParams = parse(&def.params)?;
        let rate = self.0.audio.sample_rate_hz as usize;
        Ok(Box::new(AudioSource {
            device: p.device,
            audio: Arc::clone(&self.0.audio),
            chunk: (rate * p.chunk_ms as usize / 1000).max(1),
            next: 0,
        }))
    }
}

impl Node<Signal> for AudioSource {
    fn start(&mut self, _ctx: &mut NodeContext<'_, Signal>) -> Result<Wake, NodeError> {
        Ok(self.schedule())
    }

    fn wake(&mut self, ctx: &mut NodeContext<'_, Signal>) -> Result<Wake, NodeError> {
        while self.due().is_some_and(|t| t <= ctx.now()) {
            let end = (self.next + self.chunk).min(self.audio.len());
            ctx.push(
                "out",
                Signal::Audio(AudioChunk {
                    device: self.device.clone(),
                    start_sample: self.next as u64,
                    sample_rate_hz: self.audio.sample_rate_hz,
                    samples: self.audio.samples[self.next..end].into(),
                }),
            )?;
            self.next = end;
        }
        Ok(self.schedule())
    }
}

// ------------------------------------------------------------------ I/O manager

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct IoManagerParams {
    routes: RoutingTable,
}

/// Dispatches device samples to the interfaces subscribed to that device.
/// Output ports are the interface ids named in `routes`; each is optional.
pub struct IoManagerKind;

struct IoManagerNode(IoManager);

impl NodeKind<Signal> for IoManagerKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        let p: IoManagerParams = parse(params)?;
        let outputs = p.routes.interfaces().into_iter().map(PortSpec::optional).collect();
        Ok(Ports::new(vec![PortSpec::required("in")], outputs))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<Signal>>, String> {
        let p: IoManagerParams = parse(&def.params)?;
        Ok(Box::new(IoManagerNode(IoManager::new(p.routes))))
    }
}

impl Node<Signal> for IoManagerNode {
    fn wake(&mut self, ctx: &mut NodeContext<'_, Signal>) -> Result<Wake, NodeError> {
        for packet in ctx.pop_all("in")? {
            let device = match packet.payload() {
                Signal::Audio(c) => c.device.clone(),
                other => return Err(payload_err(ctx.node_id(), "audio", other)),
            };
            let routed = self.0.dispatch(&device, packet.shared_payload());
            if routed.is_empty() {
                ctx.note(tags::DEAD_LETTER, json!({ "device": device, "total": self.0.dead_letters() }));
            }
            for (iface, sample) in routed {
                ctx.push_shared(&iface, sample)?;
            }
        }
        Ok(Wake::Input)
    }
}

// ------------------------------------------------------------------- aggregator

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AggregatorParams {
    #[serde(default = "default_window_ms")]
    window_ms: u32,
    #[serde(default = "default_hop_ms")]
    hop_ms: u32,
    #[serde(default = "default_rate")]
    sample_rate_hz: u32,
}

fn default_window_ms() -> u32 {
    1000
}

fn default_hop_ms() -> u32 {
    250
}

fn default_rate() -> u32 {
    crate::scenario::PIPELINE_RATE_HZ
}

impl AggregatorParams {
    fn config(&self) -> Result<AggregatorConfig, String> {
        let c = AggregatorConfig::from_durations(self.window_ms, self.hop_ms, self.sample_rate_hz);
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }
}

/// Slices audio chunks into overlapping windows (1 s / 250 ms by default).
pub struct AggregatorKind;

struct AggregatorNode(Aggregator<f64>);

impl NodeKind<Signal> for AggregatorKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        parse::<AggregatorParams>(params)?.config()?;
        Ok(Ports::new(vec![PortSpec::required("in")], vec![PortSpec::required("out")]))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<Signal>>, String> {
        let config = parse::<AggregatorParams>(&def.params)?.config()?;
        Ok(Box::new(AggregatorNode(Aggregator::new(config).map_err(|e| e.to_string())?)))
    }
}

impl Node<Signal> for AggregatorNode {
    fn wake(&mut self, ctx: &mut NodeContext<'_, Signal>) -> Result<Wake, NodeError> {
        for packet in ctx.pop_all("in")? {
            let Signal::Audio(chunk) = packet.payload() else {
                return Err(payload_err(ctx.node_id(), "audio", packet.payload()));
            };
            let windows = self
                .0
                .feed(&chunk.samples, chunk.sample_rate_hz)
                .map_err(|e| NodeError::new(format!("{}: {e}", ctx.node_id())))?;
            for w in windows {
                ctx.push("out", Signal::Window(w))?;
            }
        }
        Ok(Wake::Input)
    }
}

// -------------------------------------------------------------------- attention

/// 1 iff some annotation overlaps the half-open window span `[start, end)`.
/// Annotations are treated as half-open too, so touching endpoints never overlap.
pub fn scripted_keyword_detector(start_s: f64, end_s: f64, annotations: &[Annotation]) -> bool {
    annotations.iter().any(|a| a.start_s < end_s && start_s < a.end_s)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "detector", rename_all = "snake_case", deny_unknown_fields)]
enum AttentionParams {
    /// Fires on windows overlapping a scenario annotation.
    Scripted,
    Rms { threshold: f64 },
    Constant { value: bool },
}

/// Emits exactly one bit per window on the bit-typed port `bits`.
pub struct AttentionKind(pub ScenarioData);

struct AttentionNode {
    detector: Box<dyn Detector<SampleWindow<f64>>>,
}

impl NodeKind<Signal> for AttentionKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        if let AttentionParams::Rms { threshold } = parse(params)? {
            if !(threshold.is_finite() && threshold >= 0.0) {
                return Err(format!("rms threshold must be >= 0, got {threshold}"));
            }
        }
        Ok(Ports::new(vec![PortSpec::required("in")], vec![PortSpec::required("bits").bits()]))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<Signal>>, String> {
        let detector: Box<dyn Detector<SampleWindow<f64>>> = match parse(&def.params)? {
            AttentionParams::Scripted => {
                let ann = Arc::clone(&self.0.annotations);
                Box::new(move |w: &SampleWindow<f64>| -> Result<bool, DetectorError> {
                    Ok(scripted_keyword_detector(w.start_secs(), w.end_secs(), &ann))
                })
            }
            AttentionParams::Rms { threshold } => {
                Box::new(move |w: &SampleWindow<f64>| -> Result<bool, DetectorError> {
                    if w.samples.is_empty() {
                        return Err(DetectorError("empty window".into()));
                    }
                    Ok(rms_detect(&w.samples, threshold))
                })
            }
            AttentionParams::Constant { value } => Box::new(ConstantDetector(value)),
        };
        Ok(Box::new(AttentionNode { detector }))
    }
}

impl Node<Signal> for AttentionNode {
    fn wake(&mut self, ctx: &mut NodeContext<'_, Signal>) -> Result<Wake, NodeError> {
        for packet in ctx.pop_all("in")? {
            let Signal::Window(w) = packet.payload() else {
                return Err(payload_err(ctx.node_id(), "window", packet.payload()));
            };
            let d = attention_decide(self.detector.as_mut(), w);
            if let Some(e) = d.error {
                ctx.note(tags::DETECTOR_ERROR, json!({ "window": w.index, "error": e.0 }));
            }
            ctx.push("bits", Signal::Bit(d.bit))?;
        }
        Ok(Wake::Input)
    }
}

// ------------------------------------------------------------------ interpreter

/// Semantic interpreter plug-in: turns an attended window into an intent.
pub trait Interpreter: Send {
    fn interpret(&mut self, window: &SampleWindow<f64>) -> Option<Interpretation>;
}

/// Replays interpretations keyed by global window index.
pub struct ScriptedInterpreter {
    script: Arc<BTreeMap<u64, ScriptedIntent>>,
}

impl ScriptedInterpreter {
    pub fn new(script: Arc<BTreeMap<u64, ScriptedIntent>>) -> Self {
        Self { script }
    }
}

impl Interpreter for ScriptedInterpreter {
    fn interpret(&mut self, window: &SampleWindow<f64>) -> Option<Interpretation> {
        self.script
            .get(&window.index)
            .map(|s| Interpretation::new(s.skill_id.clone(), s.entities.clone(), s.confidence))
    }
}

/// Hosts an [`Interpreter`]; the shipped kind is scripted.
pub struct InterpreterKind(pub ScenarioData);

struct InterpreterNode(Box<dyn Interpreter>);

impl NodeKind<Signal> for InterpreterKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        parse::<EmptyParams>(params)?;
        Ok(Ports::new(vec![PortSpec::required("in")], vec![PortSpec::required("out")]))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<Signal>>, String> {
        parse::<EmptyParams>(&def.params)?;
        Ok(Box::new(InterpreterNode(Box::new(ScriptedInterpreter::new(Arc::clone(&self.0.script))))))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyParams {}

impl Node<Signal> for InterpreterNode {
    fn wake(&mut self, ctx: &mut NodeContext<'_, Signal>) -> Result<Wake, NodeError> {
        for packet in ctx.pop_all("in")? {
            let Signal::Window(w) = packet.payload() else {
                return Err(payload_err(ctx.node_id(), "window", packet.payload()));
            };
            if let Some(interp) = self.0.interpret(w) {
                let interp = interp.at(ctx.now());
                ctx.note(
                    tags::INTERPRETATION,
                    json!({ "window": w.index, "skill_id": interp.skill_id, "entities": interp.entities,
                            "confidence": interp.confidence }),
                );
                ctx.push("out", Signal::Interpretation(interp))?;
            }
        }
        Ok(Wake::Input)
    }
}

// ---------------------------------------------------------------- skill manager

/// Attention indicator: idle, collecting a request, running a skill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedState {
    Awaiting,
    Receiving,
    Executing,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkillManagerParams {
    #[serde(default)]
    manager: ManagerConfig,
}

/// Slot-filling skill manager over the demo skills. Speech goes out on
/// `speaker`, locomotion words on `uart`; both ports are optional.
pub struct SkillManagerKind;

struct SkillManagerNode {
    manager: SkillManager,
    executor: SkillExecutor,
    led: Option<LedState>,
}

impl NodeKind<Signal> for SkillManagerKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        parse::<SkillManagerParams>(params)?;
        Ok(Ports::new(
            vec![PortSpec::required("in")],
            vec![PortSpec::optional("speaker"), PortSpec::optional("uart")],
        ))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<Signal>>, String> {
        let p: SkillManagerParams = parse(&def.params)?;
        let mut registry = SkillRegistry::new();
        register_demo_skills(&mut registry).map_err(|e| e.to_string())?;
        Ok(Box::new(SkillManagerNode {
            manager: SkillManager::new(Arc::new(registry), p.manager),
            executor: SkillExecutor::new(),
            led: None,
        }))
    }
}

impl SkillManagerNode {
    fn set_led(&mut self, ctx: &NodeContext<'_, Signal>, state: LedState) {
        if self.led != Some(state) {
            self.led = Some(state);
            ctx.note(tags::LED, json!({ "state": state }));
        }
    }

    fn idle_led(&self) -> LedState {
        if self.manager.active_session().is_some() {
            LedState::Receiving
        } else {
            LedState::Awaiting
        }
    }

    fn schedule(&self) -> Wake {
        self.manager.next_deadline().map_or(Wake::Input, Wake::InputOrAt)
    }

    fn perform(&mut self, ctx: &mut NodeContext<'_, Signal>, actions: Vec<Action>) -> Result<(), NodeError> {
        for action in actions {
            ctx.note(tags::ACTION, serde_json::to_value(&action).unwrap_or_default());
            match action {
                Action::Execute { skill_id, entities, .. } => {
                    self.set_led(ctx, LedState::Executing);
                    let handle = self
                        .manager
                        .registry()
                        .dispatch(&skill_id, entities.clone(), ctx.now(), &self.executor);
                    match handle {
                        Ok(h) => {
                            ctx.note(SKILL_INVOKED, json!({ "skill_id": skill_id, "entities": entities }));
                            // Waiting keeps deferred skills on the virtual timeline.
                            match h.wait() {
                                Ok(outcome) => self.apply(ctx, outcome.effects)?,
                                Err(e) => ctx.note(tags::SKILL_FAILED, json!({ "skill_id": skill_id, "cause": e.0 })),
                            }
                        }
                        Err(e) => {
                            ctx.note(tags::SKILL_FAILED, json!({ "skill_id": skill_id, "cause": e.to_string() }))
                        }
                    }
                }
                Action::Prompt { text, .. } => {
                    ctx.push("speaker", Signal::Text(text))?;
                }
                Action::Abort { notice, .. } => {
                    ctx.push("speaker", Signal::Text(notice))?;
                }
                Action::Reject { .. } => {}
            }
        }
        let idle = self.idle_led();
        self.set_led(ctx, idle);
        Ok(())
    }

    fn apply(&mut self, ctx: &mut NodeContext<'_, Signal>, effects: Vec<Effect>) -> Result<(), NodeError> {
        for e in effects {
            match e {
                Effect::Speak { text } => {
                    ctx.push("speaker", Signal::Text(text))?;
                }
                Effect::Notify { text } => ctx.note(tags::NOTIFY, json!({ "text": text })),
                Effect::Locomotion { command } => {
                    ctx.push("uart", Signal::Word(encode_locomotion(command)))?;
                }
            }
        }
        Ok(())
    }
}

impl Node<Signal> for SkillManagerNode {
    fn start(&mut self, ctx: &mut NodeContext<'_, Signal>) -> Result<Wake, NodeError> {
        self.set_led(ctx, LedState::Awaiting);
        Ok(Wake::Input)
    }

    fn wake(&mut self, ctx: &mut NodeContext<'_, Signal>) -> Result<Wake, NodeError> {
        if self.manager.next_deadline().is_some_and(|d| d <= ctx.now()) {
            let actions = self.manager.expire(ctx.now());
            self.perform(ctx, actions)?;
        }
        for packet in ctx.pop_all("in")? {
            let Signal::Interpretation(interp) = packet.payload() else {
                return Err(payload_err(ctx.node_id(), "interpretation", packet.payload()));
            };
            self.set_led(ctx, LedState::Receiving);
            let actions = self.manager.submit(interp);
            self.perform(ctx, actions)?;
        }
        Ok(self.schedule())
    }
}

// ---------------------------------------------------------------------- outputs

/// Simulated text-to-speech: logs every utterance as a `speak` note.
pub struct SpeakerKind;

struct SpeakerNode;

impl NodeKind<Signal> for SpeakerKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        parse::<EmptyParams>(params)?;
        Ok(Ports::new(vec![PortSpec::required("in")], vec![]))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<Signal>>, String> {
        parse::<EmptyParams>(&def.params)?;
        Ok(Box::new(SpeakerNode))
    }
}

impl Node<Signal> for SpeakerNode {
    fn wake(&mut self, ctx: &mut NodeContext<'_, Signal>) -> Result<Wake, NodeError> {
        for packet in ctx.pop_all("in")? {
            let Signal::Text(text) = packet.payload() else {
                return Err(payload_err(ctx.node_id(), "text", packet.payload()));
            };
            ctx.note(tags::SPEAK, json!({ "text": text }));
        }
        Ok(Wake::Input)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct UartParams {
    #[serde(default = "default_baud")]
    baud: u32,
}

fn default_baud() -> u32 {
    DEFAULT_BAUD
}

/// Simulated UART transmitter. Writes are serialized: a word starts no earlier
/// than the end of the previous one, and each `uart_tx` note records its
/// little-endian bytes plus simulated start and end times.
pub struct UartSinkKind;

struct UartSink {
    word_us: u64,
    busy_until: Timestamp,
}

impl NodeKind<Signal> for UartSinkKind {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String> {
        let p: UartParams = parse(params)?;
        if p.baud == 0 {
            return Err("baud must be positive".into());
        }
        Ok(Ports::new(vec![PortSpec::required("in")], vec![]))
    }

    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<Signal>>, String> {
        let p: UartParams = parse(&def.params)?;
        Ok(Box::new(UartSink {
            word_us: (uart_transfer_time_s(2, p.baud) * 1e6).ceil() as u64,
            busy_until: Timestamp::ZERO,
        }))
    }
}

impl Node<Signal> for UartSink {
    fn wake(&mut self, ctx: &mut NodeContext<'_, Signal>) -> Result<Wake, NodeError> {
        for packet in ctx.pop_all("in")? {
            let Signal::Word(word) = *packet.payload() else {
                return Err(payload_err(ctx.node_id(), "word", packet.payload()));
            };
            let start = self.busy_until.max(ctx.now());
            self.busy_until = start + self.word_us;
            ctx.note(
                tags::UART_TX,
                json!({ "word": word, "bytes": frame_uart(word), "start_us": start, "end_us": self.busy_until }),
            );
        }
        Ok(Wake::Input)
    }
}

/// Built-in kinds plus every harness kind, bound to one scenario.
pub fn harness_catalog(data: ScenarioData) -> NodeCatalog<Signal> {
    let mut c = NodeCatalog::with_builtins();
    c.register("audio_source", AudioSourceKind(data.clone()))
        .register("io_manager", IoManagerKind)
        .register("aggregator", AggregatorKind)
        .register("attention", AttentionKind(data.clone()))
        .register("interpreter", InterpreterKind(data))
        .register("skill_manager", SkillManagerKind)
        .register("speaker", SpeakerKind)
        .register("uart_sink", UartSinkKind);
    c
}
