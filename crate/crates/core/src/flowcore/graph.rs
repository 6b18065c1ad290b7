//! Graph definitions, their JSON form, and static validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::node::Node;
use super::{LatchState, StreamPolicy, WatchdogConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDef {
    pub id: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
}

/// A stream connects one producer port to at most one consumer port.
///
/// A stream without a consumer is only legal as the control input of a latch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamDef {
    pub id: String,
    pub from_node: String,
    pub from_port: String,
    #[serde(default)]
    pub to_node: Option<String>,
    #[serde(default)]
    pub to_port: Option<String>,
    pub policy: StreamPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub watchdog: Option<WatchdogConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatchDef {
    pub stream_id: String,
    pub control_stream_id: String,
    #[serde(default)]
    pub initial_state: LatchState,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDef {
    pub nodes: Vec<NodeDef>,
    pub streams: Vec<StreamDef>,
    #[serde(default)]
    pub latches: Vec<LatchDef>,
}

/// JSON that does not match the graph schema.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("schema error at `{path}` (line {line}, column {column}): {message}")]
pub struct SchemaError {
    /// Dotted path to the offending entry, e.g. `streams[1].policy`; `.` for the root.
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl GraphDef {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let inner = e.into_inner();
            // a missing key is reported at its parent; point at the key itself
            let msg = inner.to_string();
            if let Some(key) = msg
                .strip_prefix("missing field `")
                .and_then(|rest| rest.split('`').next())
            {
                path = if path == "." { key.to_string() } else { format!("{path}.{key}") };
            }
            SchemaError {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph defs always serialize")
    }

    pub fn node(&self, id: &str) -> Option<&NodeDef> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn stream(&self, id: &str) -> Option<&StreamDef> {
        self.streams.iter().find(|s| s.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortSpec {
    pub name: String,
    pub carries_bits: bool,
    pub optional: bool,
}

impl PortSpec {
    pub fn required(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            carries_bits: false,
            optional: false,
        }
    }

    pub fn optional(name: impl Into<String>) -> Self {
        Self {
            optional: true,
            ..Self::required(name)
        }
    }

    pub fn bits(mut self) -> Self {
        self.carries_bits = true;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ports {
    pub inputs: Vec<PortSpec>,
    pub outputs: Vec<PortSpec>,
}

impl Ports {
    pub fn new(inputs: Vec<PortSpec>, outputs: Vec<PortSpec>) -> Self {
        Self { inputs, outputs }
    }

    fn input(&self, name: &str) -> Option<&PortSpec> {
        self.inputs.iter().find(|p| p.name == name)
    }

    fn output(&self, name: &str) -> Option<&PortSpec> {
        self.outputs.iter().find(|p| p.name == name)
    }
}

/// A constructible node type: declares its ports and builds instances.
pub trait NodeKind<P>: Send + Sync {
    fn ports(&self, params: &serde_json::Value) -> Result<Ports, String>;
    fn build(&self, def: &NodeDef) -> Result<Box<dyn Node<P>>, String>;
}

pub struct NodeCatalog<P> {
    kinds: BTreeMap<String, Box<dyn NodeKind<P>>>,
}

impl<P> NodeCatalog<P> {
    pub fn empty() -> Self {
        Self {
            kinds: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: impl Into<String>, kind: impl NodeKind<P> + 'static) -> &mut Self {
        self.kinds.insert(name.into(), Box::new(kind));
        self
    }

    pub fn get(&self, name: &str) -> Option<&dyn NodeKind<P>> {
        self.kinds.get(name).map(|k| k.as_ref())
    }

    pub fn kind_names(&self) -> impl Iterator<Item = &str> {
        self.kinds.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortDirection {
    Input,
    Output,
}

impl fmt::Display for PortDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PortDirection::Input => "input",
            PortDirection::Output => "output",
        })
    }
}

/// One validation finding, with the node/stream it concerns.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Diagnostic {
    #[error("node `{0}` is defined more than once")]
    DuplicateNode(String),
    #[error("node `{node}` has unknown kind `{kind}`")]
    UnknownNodeKind { node: String, kind: String },
    #[error("node `{node}` has invalid params: {reason}")]
    InvalidParams { node: String, reason: String },
    #[error("stream references unknown node `{0}`")]
    UnresolvedEndpoint(String),
    #[error("stream `{stream}` references unknown {direction} port `{port}` on node `{node}`")]
    UnknownPort {
        stream: String,
        node: String,
        port: String,
        direction: PortDirection,
    },
    #[error("stream `{0}` has more than one producer")]
    MultipleProducers(String),
    #[error("stream `{0}` is defined more than once")]
    DuplicateStream(String),
    #[error("stream `{0}` connects a port to itself")]
    SelfLoop(String),
    #[error("{direction} port `{port}` on node `{node}` is connected to more than one stream")]
    PortConflict {
        node: String,
        port: String,
        direction: PortDirection,
    },
    #[error("required {direction} port `{port}` on node `{node}` is not connected")]
    UnconnectedPort {
        node: String,
        port: String,
        direction: PortDirection,
    },
    #[error("stream `{stream}` has to_node without to_port or vice versa")]
    HalfConnected { stream: String },
    #[error("stream `{stream}` has an invalid policy: {reason}")]
    InvalidPolicy { stream: String, reason: String },
    #[error("stream `{stream}` has an invalid watchdog: {reason}")]
    InvalidWatchdog { stream: String, reason: String },
    #[error("stream `{0}` has no consumer and is not a latch control stream")]
    DanglingStream(String),
    #[error("latch references unknown stream `{0}`")]
    UnknownLatchStream(String),
    #[error("stream `{0}` is gated by more than one latch")]
    DuplicateLatch(String),
    #[error("latch on `{stream}` is controlled by itself")]
    LatchSelfControl { stream: String },
    #[error("latch control stream `{0}` does not carry bits")]
    LatchControlNotBits(String),
    #[error("latch control stream `{0}` must not have a consumer node")]
    LatchControlConsumed(String),
    #[error("latched stream `{0}` has no consumer")]
    LatchedStreamUnconsumed(String),
}

impl Diagnostic {
    /// The node or stream id the diagnostic is about.
    pub fn location(&self) -> &str {
        match self {
            Diagnostic::DuplicateNode(n)
            | Diagnostic::UnresolvedEndpoint(n)
            | Diagnostic::MultipleProducers(n)
            | Diagnostic::DuplicateStream(n)
            | Diagnostic::SelfLoop(n)
            | Diagnostic::DanglingStream(n)
            | Diagnostic::UnknownLatchStream(n)
            | Diagnostic::DuplicateLatch(n)
            | Diagnostic::LatchControlNotBits(n)
            | Diagnostic::LatchControlConsumed(n)
            | Diagnostic::LatchedStreamUnconsumed(n) => n,
            Diagnostic::UnknownNodeKind { node, .. }
            | Diagnostic::InvalidParams { node, .. }
            | Diagnostic::PortConflict { node, .. }
            | Diagnostic::UnconnectedPort { node, .. } => node,
            Diagnostic::UnknownPort { stream, .. }
            | Diagnostic::HalfConnected { stream }
            | Diagnostic::InvalidPolicy { stream, .. }
            | Diagnostic::InvalidWatchdog { stream, .. }
            | Diagnostic::LatchSelfControl { stream } => stream,
        }
    }
}

/// Checks a graph against the node kinds in `catalog`. Empty result means valid.
pub fn validate<P>(def: &GraphDef, catalog: &NodeCatalog<P>) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut ports: BTreeMap<&str, Option<Ports>> = BTreeMap::new();
    for node in &def.nodes {
        if ports.contains_key(node.id.as_str()) {
            diags.push(Diagnostic::DuplicateNode(node.id.clone()));
            continue;
        }
        let declared = match catalog.get(&node.kind) {
            None => {
                diags.push(Diagnostic::UnknownNodeKind {
                    node: node.id.clone(),
                    kind: node.kind.clone(),
                });
                None
            }
            Some(kind) => match kind.ports(&node.params) {
                Ok(p) => Some(p),
                Err(reason) => {
                    diags.push(Diagnostic::InvalidParams {
                        node: node.id.clone(),
                        reason,
                    });
                    None
                }
            },
        };
        ports.insert(node.id.as_str(), declared);
    }

    let control_ids: BTreeSet<&str> = def
        .latches
        .iter()
        .map(|l| l.control_stream_id.as_str())
        .collect();

    let mut seen_streams: BTreeMap<&str, &StreamDef> = BTreeMap::new();
    let mut used_outputs: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut used_inputs: BTreeMap<(&str, &str), usize> = BTreeMap::new();

    for s in &def.streams {
        if let Some(prev) = seen_streams.get(s.id.as_str()) {
            if prev.from_node != s.from_node || prev.from_port != s.from_port {
                diags.push(Diagnostic::MultipleProducers(s.id.clone()));
            } else {
                diags.push(Diagnostic::DuplicateStream(s.id.clone()));
            }
            continue;
        }
        seen_streams.insert(s.id.as_str(), s);

        if let Err(e) = s.policy.validate() {
            diags.push(Diagnostic::InvalidPolicy {
                stream: s.id.clone(),
                reason: e.to_string(),
            });
        }
        if let Some(wd) = &s.watchdog {
            if let Err(e) = wd.validate() {
                diags.push(Diagnostic::InvalidWatchdog {
                    stream: s.id.clone(),
                    reason: e.to_string(),
                });
            }
        }

        check_endpoint(&ports, s, &s.from_node, &s.from_port, PortDirection::Output, &mut diags);
        *used_outputs
            .entry((s.from_node.as_str(), s.from_port.as_str()))
            .or_default() += 1;

        match (&s.to_node, &s.to_port) {
            (Some(to), Some(port)) => {
                check_endpoint(&ports, s, to, port, PortDirection::Input, &mut diags);
                *used_inputs.entry((to.as_str(), port.as_str())).or_default() += 1;
                if *to == s.from_node && *port == s.from_port {
                    diags.push(Diagnostic::SelfLoop(s.id.clone()));
                }
            }
            (None, None) => {
                if !control_ids.contains(s.id.as_str()) {
                    diags.push(Diagnostic::DanglingStream(s.id.clone()));
                }
            }
            _ => diags.push(Diagnostic::HalfConnected {
                stream: s.id.clone(),
            }),
        }
    }

    for ((node, port), _) in used_outputs.iter().filter(|(_, n)| **n > 1) {
        diags.push(Diagnostic::PortConflict {
            node: node.to_string(),
            port: port.to_string(),
            direction: PortDirection::Output,
        });
    }
    for ((node, port), _) in used_inputs.iter().filter(|(_, n)| **n > 1) {
        diags.push(Diagnostic::PortConflict {
            node: node.to_string(),
            port: port.to_string(),
            direction: PortDirection::Input,
        });
    }

    for node in &def.nodes {
        let Some(Some(p)) = ports.get(node.id.as_str()) else {
            continue;
        };
        for (specs, used, direction) in [
            (&p.inputs, &used_inputs, PortDirection::Input),
            (&p.outputs, &used_outputs, PortDirection::Output),
        ] {
            for spec in specs.iter().filter(|s| !s.optional) {
                if !used.contains_key(&(node.id.as_str(), spec.name.as_str())) {
                    diags.push(Diagnostic::UnconnectedPort {
                        node: node.id.clone(),
                        port: spec.name.clone(),
                        direction,
                    });
                }
            }
        }
    }

    let mut gated = BTreeSet::new();
    for latch in &def.latches {
        let data = seen_streams.get(latch.stream_id.as_str());
        let control = seen_streams.get(latch.control_stream_id.as_str());
        if data.is_none() {
            diags.push(Diagnostic::UnknownLatchStream(latch.stream_id.clone()));
        }
        if control.is_none() {
            diags.push(Diagnostic::UnknownLatchStream(latch.control_stream_id.clone()));
        }
        if latch.stream_id == latch.control_stream_id {
            diags.push(Diagnostic::LatchSelfControl {
                stream: latch.stream_id.clone(),
            });
        }
        if !gated.insert(latch.stream_id.as_str()) {
            diags.push(Diagnostic::DuplicateLatch(latch.stream_id.clone()));
        }
        if let Some(data) = data {
            if data.to_node.is_none() {
                diags.push(Diagnostic::LatchedStreamUnconsumed(data.id.clone()));
            }
        }
        if let Some(control) = control {
            if control.to_node.is_some() {
                diags.push(Diagnostic::LatchControlConsumed(control.id.clone()));
            }
            let bits = ports
                .get(control.from_node.as_str())
                .and_then(|p| p.as_ref())
                .and_then(|p| p.output(&control.from_port))
                .map(|spec| spec.carries_bits);
            // unknown producers/ports are already reported above
            if bits == Some(false) {
                diags.push(Diagnostic::LatchControlNotBits(control.id.clone()));
            }
        }
    }

    diags
}

fn check_endpoint(
    ports: &BTreeMap<&str, Option<Ports>>,
    stream: &StreamDef,
    node: &str,
    port: &str,
    direction: PortDirection,
    diags: &mut Vec<Diagnostic>,
) {
    match ports.get(node) {
        None => diags.push(Diagnostic::UnresolvedEndpoint(node.to_string())),
        Some(None) => {}
        Some(Some(p)) => {
            let found = match direction {
                PortDirection::Input => p.input(port).is_some(),
                PortDirection::Output => p.output(port).is_some(),
            };
            if !found {
                diags.push(Diagnostic::UnknownPort {
                    stream: stream.id.clone(),
                    node: node.to_string(),
                    port: port.to_string(),
                    direction,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_streams_names_the_key() {
        let e = GraphDef::from_json(r#"{"nodes": []}"#).unwrap_err();
        assert_eq!(e.path, "streams");
    }

    #[test]
    fn lossy_without_capacity_points_into_the_stream() {
        let e = GraphDef::from_json(
            r#"{"nodes": [], "streams": [
                {"id": "a", "from_node": "x", "from_port": "o", "policy": {"kind": "lossless", "deadline_us": 5}},
                {"id": "b", "from_node": "x", "from_port": "o", "policy": {"kind": "lossy", "max_successive_misses": 1}}
            ]}"#,
        )
        .unwrap_err();
        assert!(e.path.starts_with("streams[1].policy"), "{}", e.path);
        assert!(e.message.contains("capacity"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = GraphDef::from_json(r#"{"nodes": [], "streams": [], "extra": 1}"#).unwrap_err();
        assert!(e.message.contains("extra"));
    }
}
