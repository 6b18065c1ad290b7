use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Device id → subscribed interface ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoutingTable(pub BTreeMap<String, Vec<String>>);

impl RoutingTable {
    pub fn subscribers(&self, device: &str) -> &[String] {
        self.0.get(device).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every interface any device routes to, sorted and deduplicated.
    pub fn interfaces(&self) -> BTreeSet<&str> {
        self.0.values().flatten().map(String::as_str).collect()
    }
}

/// One copy of `sample` per subscribed interface; empty for unknown devices.
pub fn io_manager_route<T: Clone>(device: &str, sample: &T, table: &RoutingTable) -> Vec<(String, T)> {
    table
        .subscribers(device)
        .iter()
        .map(|iface| (iface.clone(), sample.clone()))
        .collect()
}

/// Routing plus a dead-letter count for samples from unrouted devices.
#[derive(Debug, Clone, Default)]
pub struct IoManager {
    table: RoutingTable,
    dead_letters: u64,
}

impl IoManager {
    pub fn new(table: RoutingTable) -> Self {
        Self { table, dead_letters: 0 }
    }

    pub fn table(&self) -> &RoutingTable {
        &self.table
    }

    pub fn dispatch<T: Clone>(&mut self, device: &str, sample: &T) -> Vec<(String, T)> {
        let out = io_manager_route(device, sample, &self.table);
        if out.is_empty() {
            self.dead_letters += 1;
        }
        out
    }

    pub fn dead_letters(&self) -> u64 {
        self.dead_letters
    }
}
