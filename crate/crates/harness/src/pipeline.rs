use std::path::Path;

use latchflow::flowcore::{run_virtual, validate, Diagnostic, GraphDef, RunError, SchemaError, StopCondition, Timestamp, VirtualClock};
use latchflow::robotics::{scan_to_points, BeamMode, GeometryError, ScanPoint, SweepConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nodes::{harness_catalog, ScenarioData};
use crate::report::RunReportFile;
use crate::scenario::{parse_json, ScenarioError, ScenarioScript, SceneEcho};

/// Height below which a return is treated as a climbable step.
pub const DEFAULT_CLIMB_HEIGHT_M: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("graph is invalid:\n{}", .0.iter().map(|d| format!("  at `{}`: {d}", d.location())).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("scan: {0}")]
    Scan(#[from] GeometryError),
}

/// Parses a graph document and checks it against the harness node kinds.
pub fn load_graph_config(text: &str) -> Result<GraphDef, ConfigError> {
    let def = GraphDef::from_json(text)?;
    let diags = validate(&def, &harness_catalog(ScenarioData::empty()));
    if diags.is_empty() {
        Ok(def)
    } else {
        Err(ConfigError::Invalid(diags))
    }
}

/// Runs `graph` against `scenario` on a virtual clock until the scenario's
/// time limit. Relative audio paths resolve against `base_dir`. A failing
/// node yields a partial report whose status names it.
pub fn run_scenario(
    graph: &GraphDef,
    scenario: &ScenarioScript,
    base_dir: &Path,
    seed: Option<u64>,
) -> Result<RunReportFile, HarnessError> {
    let seed = seed.unwrap_or(scenario.seed);
    let audio = scenario.load_audio(base_dir, seed)?;
    let catalog = harness_catalog(ScenarioData::new(audio, scenario));
    let stop = StopCondition::until(Timestamp::from_secs_f64(scenario.time_limit_s));
    let run = run_virtual(graph, &catalog, &VirtualClock::new(), stop)?;
    let mut report = RunReportFile::from_run(graph, run, seed);
    if !scenario.ultrasonic_scene.is_empty() {
        report.obstacle_scan = scan_scene(
            &scenario.ultrasonic_scene,
            &SweepConfig::default(),
            DEFAULT_CLIMB_HEIGHT_M,
            BeamMode::default(),
        )?;
    }
    Ok(report)
}

/// Loads both documents from disk and runs them.
pub fn run_files(graph_path: &Path, scenario_path: &Path, seed: Option<u64>) -> anyhow::Result<RunReportFile> {
    use anyhow::Context;
    let text = std::fs::read_to_string(graph_path).with_context(|| format!("reading {}", graph_path.display()))?;
    let graph = load_graph_config(&text).with_context(|| format!("loading {}", graph_path.display()))?;
    let scenario = ScenarioScript::load(scenario_path)?;
    let base = scenario_path.parent().unwrap_or(Path::new("."));
    Ok(run_scenario(&graph, &scenario, base, seed)?)
}

/// Ultrasonic scene for the `scan` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_climb")]
    pub climb_height_m: f64,
    pub echoes: Vec<SceneEcho>,
}

fn default_climb() -> f64 {
    DEFAULT_CLIMB_HEIGHT_M
}

impl SceneFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        parse_json(text).map_err(|(path, message)| ScenarioError::Schema { path, message })
    }
}

pub fn scan_scene(
    echoes: &[SceneEcho],
    sweep: &SweepConfig,
    climb_height_m: f64,
    mode: BeamMode,
) -> Result<Vec<ScanPoint>, GeometryError> {
    let raw: Vec<_> = echoes.iter().map(|e| e.to_raw(sweep)).collect();
    scan_to_points(&raw, sweep, climb_height_m, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_echo_distance_survives_tof_round_trip() {
        let echoes = [
            SceneEcho {
                theta_deg: 0.0,
                distance_m: Some(1.0),
            },
            SceneEcho {
                theta_deg: 30.0,
                distance_m: None,
            },
        ];
        let pts = scan_scene(&echoes, &SweepConfig::default(), 0.05, BeamMode::Sine).unwrap();
        assert!((pts[0].d_ideal_m.unwrap() - 1.0).abs() < 1e-12);
        assert!(pts[1].d_ideal_m.is_none());
    }
}
