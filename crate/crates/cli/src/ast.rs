//! The file-level syntax tree of the network DSL: named network blocks plus
//! a shared definition section, and the conversion into semantic networks.

use wnet_core::syntax::{ConnGraph, DefEnv, Name, Network, State, SystemTerm};

/// A recursive definition `def A(x, ..) = STATE;`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefDecl {
    pub name: Name,
    pub params: Vec<Name>,
    pub body: State,
}

/// A connectivity edge; `both` records the `<->` form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: Name,
    pub to: Name,
    pub both: bool,
}

/// One `net NAME { .. }` block. Vertices without an `at` clause are the
/// interface of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetBlock {
    pub name: String,
    pub nodes: Vec<Name>,
    pub edges: Vec<Edge>,
    pub defs: Vec<DefDecl>,
    pub stations: Vec<(Name, State)>,
}

/// A parsed file: shared definitions visible to every block, then the
/// blocks in source order. Block names are unique within a file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetFile {
    pub defs: Vec<DefDecl>,
    pub nets: Vec<NetBlock>,
}

impl NetBlock {
    /// Builds the semantic network, merging the shared definitions with the
    /// block's own (block definitions shadow shared ones of the same name).
    pub fn to_network(&self, shared: &[DefDecl]) -> Network {
        let mut graph = ConnGraph::new();
        for v in &self.nodes {
            graph.add_vertex(v.clone());
        }
        for e in &self.edges {
            if e.both {
                graph.add_biedge(e.from.clone(), e.to.clone());
            } else {
                graph.add_edge(e.from.clone(), e.to.clone());
            }
        }
        let mut defs = DefEnv::new();
        for d in shared.iter().chain(&self.defs) {
            defs.insert(d.name.clone(), d.params.clone(), d.body.clone());
        }
        let system = SystemTerm::par_all(
            self.stations
                .iter()
                .map(|(n, s)| SystemTerm::Node(n.clone(), s.clone())),
        );
        Network::new(graph, system, defs)
    }
}

impl NetFile {
    pub fn get(&self, name: &str) -> Option<&NetBlock> {
        self.nets.iter().find(|b| b.name == name)
    }

    /// Resolves a block by name into a semantic network.
    pub fn network(&self, name: &str) -> Option<Network> {
        self.get(name).map(|b| b.to_network(&self.defs))
    }

    /// All semantic networks of the file, in source order.
    pub fn networks(&self) -> Vec<(String, Network)> {
        self.nets
            .iter()
            .map(|b| (b.name.clone(), b.to_network(&self.defs)))
            .collect()
    }
}
