//! Composing and decomposing networks: the asymmetric extension operator
//! (the network under test may not occupy vertices the extension claims,
//! while the extension may occupy the interface of the network under test),
//! the inverse decomposition into a generating network and a remainder,
//! network closure, and the symmetric merge used to demonstrate why testing
//! needs the asymmetric operator.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::syntax::{ConnGraph, DefEnv, Name, Network, SystemTerm};

/// A network whose system is a single located state — the building blocks
/// from which every network can be generated by repeated extension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratingNetwork {
    net: Network,
}

impl GeneratingNetwork {
    /// Wraps a network with exactly one occupied node.
    pub fn new(net: Network) -> Option<Self> {
        if net.nodes().len() == 1 {
            Some(GeneratingNetwork { net })
        } else {
            None
        }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn into_network(self) -> Network {
        self.net
    }
}

/// Merges definition environments; clashing names must agree.
fn merge_defs(a: &DefEnv, b: &DefEnv) -> Option<DefEnv> {
    let mut out = a.clone();
    for (name, def) in b.iter() {
        match a.get(name) {
            Some(existing) if existing != def => return None,
            Some(_) => {}
            None => out.insert(name.clone(), def.0.clone(), def.1.clone()),
        }
    }
    Some(out)
}

fn union_graphs(a: &ConnGraph, b: &ConnGraph) -> ConnGraph {
    let mut g = a.clone();
    for v in b.vertices() {
        g.add_vertex(v.clone());
    }
    for (f, t) in b.edges() {
        g.add_edge(f.clone(), t.clone());
    }
    g
}

fn par_systems(a: &SystemTerm, b: &SystemTerm) -> SystemTerm {
    let mut comps = a.components();
    comps.extend(b.components());
    SystemTerm::par_all(comps.into_iter().map(|(n, s)| SystemTerm::Node(n, s)))
}

/// Extends the network `m` with the network `p`: graph union and parallel
/// composition.
///
/// Defined iff no occupied node of `m` is a vertex of `p`'s graph — so `p`
/// may occupy `m`'s interface but not the other way around, which makes the
/// operator deliberately asymmetric.
pub fn extend(m: &Network, p: &Network) -> Option<Network> {
    let m_nodes = m.nodes();
    if p.graph.vertices().any(|v| m_nodes.contains(v)) {
        return None;
    }
    let defs = merge_defs(&m.defs, &p.defs)?;
    Some(Network {
        graph: union_graphs(&m.graph, &p.graph),
        system: par_systems(&m.system, &p.system),
        defs,
    })
}

/// Splits off the lexicographically smallest occupied node as a generating
/// network, leaving a remainder that re-extends to the original:
/// `extend(remainder, generator)` is canonically congruent to `m`.
///
/// The generator keeps the chosen node together with its unoccupied
/// neighbours and the edges to them; edges towards other occupied nodes
/// stay with the remainder (where the chosen node turns into an interface
/// vertex). Returns `None` for node-free networks.
pub fn decompose(m: &Network) -> Option<(Network, GeneratingNetwork)> {
    let comps = m.system.components();
    let (g_node, g_state) = comps.first()?.clone();

    let occupied: BTreeSet<Name> = comps.iter().map(|(n, _)| n.clone()).collect();
    let mut g_graph = ConnGraph::new();
    g_graph.add_vertex(g_node.clone());
    let mut rest_edges: Vec<(Name, Name)> = Vec::new();
    for (f, t) in m.graph.edges() {
        let touches = *f == g_node || *t == g_node;
        let other = if *f == g_node { t } else { f };
        if touches && !occupied.contains(other) {
            g_graph.add_edge(f.clone(), t.clone());
        } else {
            rest_edges.push((f.clone(), t.clone()));
        }
    }

    let rest_nodes: Vec<(Name, SystemTerm)> = comps
        .iter()
        .skip(1)
        .map(|(n, s)| (n.clone(), SystemTerm::Node(n.clone(), s.clone())))
        .collect();
    let mut rest_graph = ConnGraph::new();
    for (n, _) in &rest_nodes {
        rest_graph.add_vertex(n.clone());
    }
    for (f, t) in rest_edges {
        rest_graph.add_edge(f, t);
    }
    let remainder = Network {
        graph: rest_graph,
        system: SystemTerm::par_all(rest_nodes.into_iter().map(|(_, t)| t)),
        defs: m.defs.clone(),
    };
    let generator = GeneratingNetwork {
        net: Network {
            graph: g_graph,
            system: SystemTerm::Node(g_node, g_state),
            defs: m.defs.clone(),
        },
    };
    Some((remainder, generator))
}

/// Removes every interface vertex and its incident edges, leaving a closed
/// network with the same code.
pub fn closure(m: &Network) -> Network {
    let occupied = m.nodes();
    let mut g = ConnGraph::new();
    for v in &occupied {
        g.add_vertex(v.clone());
    }
    for (f, t) in m.graph.edges() {
        if occupied.contains(f) && occupied.contains(t) {
            g.add_edge(f.clone(), t.clone());
        }
    }
    Network {
        graph: g,
        system: m.system.clone(),
        defs: m.defs.clone(),
    }
}

/// The symmetric merge: defined iff the occupied node sets are disjoint and
/// the two graphs agree on every edge between occupied nodes of the two
/// sides. Same union construction as `extend`; exists to show that a
/// symmetric composition cannot drive testing (it forbids the observer from
/// sitting on the observed interface in one of the two roles).
pub fn sym_merge(m: &Network, n: &Network) -> Option<Network> {
    let m_nodes = m.nodes();
    let n_nodes = n.nodes();
    if m_nodes.intersection(&n_nodes).next().is_some() {
        return None;
    }
    for a in m_nodes.iter() {
        for b in n_nodes.iter() {
            for (f, t) in [(a, b), (b, a)] {
                if m.graph.connected(f, t) != n.graph.connected(f, t) {
                    return None;
                }
            }
        }
    }
    let defs = merge_defs(&m.defs, &n.defs)?;
    Some(Network {
        graph: union_graphs(&m.graph, &n.graph),
        system: par_systems(&m.system, &n.system),
        defs,
    })
}
