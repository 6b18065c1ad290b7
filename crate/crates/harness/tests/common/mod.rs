#![allow(dead_code)]

use std::path::{Path, PathBuf};

use latchflow_harness::{load_graph_config, run_scenario, RunReportFile, ScenarioScript};
use latchflow::flowcore::GraphDef;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn graph_text() -> String {
    std::fs::read_to_string(root().join("configs/speech_pipeline.json")).unwrap()
}

pub fn graph() -> GraphDef {
    load_graph_config(&graph_text()).unwrap()
}

/// The shipped graph with `edit` applied to its JSON form.
pub fn graph_with(edit: impl FnOnce(&mut serde_json::Value)) -> GraphDef {
    let mut v: serde_json::Value = serde_json::from_str(&graph_text()).unwrap();
    edit(&mut v);
    load_graph_config(&v.to_string()).unwrap()
}

pub fn node_params<'a>(graph: &'a mut serde_json::Value, id: &str) -> &'a mut serde_json::Value {
    let nodes = graph["nodes"].as_array_mut().unwrap();
    let node = nodes.iter_mut().find(|n| n["id"] == id).unwrap();
    &mut node["params"]
}

pub fn scenario(name: &str) -> ScenarioScript {
    ScenarioScript::load(root().join("scenarios").join(name)).unwrap()
}

pub fn scenario_json(v: serde_json::Value) -> ScenarioScript {
    ScenarioScript::from_json(&v.to_string()).unwrap()
}

pub fn run(graph: &GraphDef, s: &ScenarioScript) -> RunReportFile {
    run_scenario(graph, s, &root().join("scenarios"), None).unwrap()
}

pub fn run_in(graph: &GraphDef, s: &ScenarioScript, dir: &Path) -> RunReportFile {
    run_scenario(graph, s, dir, None).unwrap()
}
