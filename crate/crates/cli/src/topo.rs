//! JSON topology descriptions for the routing case study.
//!
//! A topology file names the connectivity edges and, per internal hop
//! station, the weighted next-hop choices:
//!
//! ```json
//! {
//!   "edges": [["i", "n1"], ["n1", "n2"], ["n2", "o"]],
//!   "hops": { "1": { "2": 1 } }
//! }
//! ```
//!
//! Hop stations are named `n1 .. nj` and keyed by index; weights are
//! positive integers, normalised by their sum.

use std::collections::BTreeMap;

use serde::Deserialize;

use wnet_core::routing::ProtocolConfig;
use wnet_core::syntax::{ConnGraph, Name};

#[derive(Debug, Clone, Deserialize)]
pub struct TopologyFile {
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub hops: BTreeMap<String, BTreeMap<String, u32>>,
}

impl TopologyFile {
    /// Builds a protocol configuration for buffer capacity `k`. An empty
    /// `values` keeps the default payloads `1..=k`. Structural validation
    /// happens later, in the configuration's own check.
    pub fn into_config(self, k: usize, values: &[i64]) -> Result<ProtocolConfig, String> {
        let mut graph = ConnGraph::new();
        for (a, b) in &self.edges {
            if a == b {
                return Err(format!("edge `{a}` -> `{b}` joins a vertex to itself"));
            }
            graph.add_edge(Name::new(a), Name::new(b));
        }
        let mut hops: BTreeMap<usize, Vec<(usize, u32)>> = BTreeMap::new();
        for (key, row) in &self.hops {
            let h: usize = key
                .parse()
                .map_err(|_| format!("hop key `{key}` is not an index"))?;
            let mut entries = Vec::new();
            for (target, weight) in row {
                let t: usize = target
                    .parse()
                    .map_err(|_| format!("next-hop key `{target}` is not an index"))?;
                entries.push((t, *weight));
            }
            hops.insert(h, entries);
        }
        let mut cfg = ProtocolConfig::new(graph, hops, k);
        if !values.is_empty() {
            cfg.values = values.to_vec();
        }
        Ok(cfg)
    }
}

/// Parses the JSON text of a topology file.
pub fn parse_topology(text: &str) -> Result<TopologyFile, String> {
    serde_json::from_str(text).map_err(|e| format!("invalid topology JSON: {e}"))
}
