//! Simulation harness for the latchflow runtime.
//!
//! Wires the reference speech-only pipeline (audio source, I/O manager,
//! window aggregator, attention gate, scripted interpreter, skill manager,
//! speaker and UART outputs) from `latchflow` components, loads graph and
//! scenario documents, and turns virtual-clock runs into deterministic
//! [`RunReportFile`]s.

pub mod nodes;
pub mod pipeline;
pub mod report;
pub mod routing;
pub mod scenario;
pub mod signal;

pub use nodes::{harness_catalog, scripted_keyword_detector, Interpreter, LedState, ScenarioData, ScriptedInterpreter};
pub use pipeline::{
    load_graph_config, run_files, run_scenario, scan_scene, ConfigError, HarnessError, SceneFile,
    DEFAULT_CLIMB_HEIGHT_M,
};
pub use report::{RunReportFile, WindowFlow};
pub use routing::{io_manager_route, IoManager, RoutingTable};
pub use scenario::{Annotation, AudioSourceSpec, ScenarioScript, SceneEcho, SyntheticAudio, Tone};
pub use signal::{AudioChunk, Signal};
