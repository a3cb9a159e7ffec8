//! Properties of the network step relation: node stability of targets,
//! insensitivity to disconnected graph extensions, factorisation of composite
//! targets, and invariance under structural canonicalisation.

mod common;

use std::collections::BTreeSet;

use common::{closed_state, runner, same_distributions, same_transitions, wf_network, TOL};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use wnet_core::compose::extend;
use wnet_core::intensional::{canonical_image, net_input, net_steps};
use wnet_core::prob::{product_image, SubDistribution};
use wnet_core::syntax::{canonicalize, ConnGraph, DefEnv, Name, Network, SystemTerm, Val};

const OCC: &[&str] = &["a1", "a2"];
const IFC: &[&str] = &["u", "v"];

/// Sources, channels, and values probed by every `net_input` comparison.
/// `ext` never appears in any generated graph, so it exercises the
/// fully-disconnected case as well.
const SOURCES: &[&str] = &["u", "v", "ext"];
const CHANNELS: &[&str] = &["c", "d"];
const VALUES: &[i64] = &[0, 7];

fn input_probes() -> Vec<(Name, Name, Val)> {
    let mut probes = Vec::new();
    for src in SOURCES {
        for ch in CHANNELS {
            for val in VALUES {
                probes.push((Name::new(src), Name::new(ch), Val::Int(*val)));
            }
        }
    }
    probes
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

/// Every target of every transition keeps the set of occupied nodes intact:
/// stations never appear or disappear, they only change state.
#[test]
fn transition_targets_keep_the_node_set_fixed() {
    let mut runner = runner(0x31, 220);
    runner
        .run(&wf_network(OCC, IFC, 2, 3), |m| {
            let nodes: BTreeSet<Name> = m.system.nodes();
            let check = |d: &SubDistribution<SystemTerm>| -> Result<(), TestCaseError> {
                prop_assert!(
                    (d.mass() - 1.0).abs() <= 1e-7,
                    "target mass {} is not 1",
                    d.mass()
                );
                for t in d.support() {
                    prop_assert_eq!(
                        &t.nodes(),
                        &nodes,
                        "node set changed across a transition"
                    );
                }
                Ok(())
            };
            for (_, d) in net_steps(&m).map_err(|e| fail(e.to_string()))? {
                check(&d)?;
            }
            for (src, ch, val) in input_probes() {
                for d in net_input(&m, &src, &ch, val).map_err(|e| fail(e.to_string()))? {
                    check(&d)?;
                }
            }
            Ok(())
        })
        .unwrap_or_else(|e| panic!("{e}"));
}

/// A random connectivity graph over fresh and interface vertices only; its
/// vertex set never meets the occupied nodes, so gluing it onto a network
/// must not disturb the step relation in either direction.
fn detached_graph() -> BoxedStrategy<ConnGraph> {
    let pool = vec!["z1", "z2", "u", "v"];
    (
        proptest::sample::subsequence(pool, 0..=4),
        proptest::collection::vec(any::<bool>(), 16),
    )
        .prop_map(|(verts, bits)| {
            let mut g = ConnGraph::new();
            for v in &verts {
                g.add_vertex(Name::new(v));
            }
            let mut k = 0;
            for a in &verts {
                for b in &verts {
                    if a != b {
                        if bits[k] {
                            g.add_edge(Name::new(a), Name::new(b));
                        }
                        k += 1;
                    }
                }
            }
            g
        })
        .boxed()
}

fn union_graphs(a: &ConnGraph, b: &ConnGraph) -> ConnGraph {
    let mut g = a.clone();
    for v in b.vertices() {
        g.add_vertex(v.clone());
    }
    for (from, to) in b.edges() {
        if !g.connected(from, to) {
            g.add_edge(from.clone(), to.clone());
        }
    }
    g
}

/// Widening the graph with vertices and edges that never touch an occupied
/// node leaves every transition unchanged, and shrinking it back does too:
/// the two step sets are equal, which covers both directions at once.
#[test]
fn detached_graph_extensions_do_not_disturb_transitions() {
    let mut runner = runner(0x32, 220);
    runner
        .run(
            &(wf_network(OCC, IFC, 2, 2), detached_graph()),
            |(m, extra)| {
                for v in extra.vertices() {
                    prop_assert!(
                        !m.system.nodes().contains(v),
                        "the detached graph leaked an occupied node"
                    );
                }
                let wide = Network {
                    graph: union_graphs(&m.graph, &extra),
                    system: m.system.clone(),
                    defs: m.defs.clone(),
                };
                let narrow_steps = net_steps(&m).map_err(|e| fail(e.to_string()))?;
                let wide_steps = net_steps(&wide).map_err(|e| fail(e.to_string()))?;
                prop_assert!(
                    same_transitions(&narrow_steps, &wide_steps),
                    "widening the graph changed the spontaneous transitions"
                );
                for (src, ch, val) in input_probes() {
                    let narrow_in =
                        net_input(&m, &src, &ch, val.clone()).map_err(|e| fail(e.to_string()))?;
                    let wide_in =
                        net_input(&wide, &src, &ch, val).map_err(|e| fail(e.to_string()))?;
                    prop_assert!(
                        same_distributions(&narrow_in, &wide_in),
                        "widening the graph changed the reaction to an input from {}",
                        src.as_str()
                    );
                }
                Ok(())
            },
        )
        .unwrap_or_else(|e| panic!("{e}"));
}

/// A one-node generating network over a fresh station `g1`, wired to a random
/// subset of the interface pool in random directions.  Its vertex set is
/// disjoint from the occupied pool, so extension is always defined.
fn generating_network() -> BoxedStrategy<Network> {
    (
        proptest::sample::subsequence(vec!["u", "v"], 0..=2),
        closed_state(2, Vec::new()),
        proptest::collection::vec(any::<bool>(), 2),
    )
        .prop_map(|(ifc, state, dirs)| {
            let g = Name::new("g1");
            let mut graph = ConnGraph::new();
            graph.add_vertex(g.clone());
            for (i, v) in ifc.iter().enumerate() {
                let v = Name::new(v);
                graph.add_vertex(v.clone());
                if dirs[i] {
                    graph.add_edge(v, g.clone());
                } else {
                    graph.add_edge(g.clone(), v);
                }
            }
            Network {
                graph,
                system: SystemTerm::node(g.as_str(), state),
                defs: DefEnv::new(),
            }
        })
        .boxed()
}

/// Every target distribution of a composite network factors exactly as the
/// product of its two per-component marginals: transitions never correlate
/// the residual states of disjoint parts of the system.
#[test]
fn composite_targets_factor_through_the_component_split() {
    let mut runner = runner(0x33, 220);
    runner
        .run(
            &(wf_network(OCC, IFC, 2, 2), generating_network()),
            |(m, g)| {
                let composite = match extend(&m, &g) {
                    Some(c) => c,
                    None => return Err(fail("extension was unexpectedly undefined".into())),
                };
                let generator = Name::new("g1");
                let split = |t: &SystemTerm| -> (SystemTerm, SystemTerm) {
                    let mut m_part = Vec::new();
                    let mut g_part = Vec::new();
                    for (n, s) in t.components() {
                        let node = SystemTerm::Node(n.clone(), s.clone());
                        if n == generator {
                            g_part.push(node);
                        } else {
                            m_part.push(node);
                        }
                    }
                    (SystemTerm::par_all(m_part), SystemTerm::par_all(g_part))
                };
                let check = |d: &SubDistribution<SystemTerm>| -> Result<(), TestCaseError> {
                    let joint = d.map_image(|t| split(t));
                    let left = joint.map_image(|(a, _)| a.clone());
                    let right = joint.map_image(|(_, b)| b.clone());
                    let product = product_image(|a, b| (a.clone(), b.clone()), &left, &right);
                    prop_assert!(
                        product.approx_eq(&joint, 1e-9),
                        "a composite target does not factor into its component marginals"
                    );
                    Ok(())
                };
                for (_, d) in net_steps(&composite).map_err(|e| fail(e.to_string()))? {
                    check(&d)?;
                }
                for (src, ch, val) in input_probes() {
                    for d in
                        net_input(&composite, &src, &ch, val).map_err(|e| fail(e.to_string()))?
                    {
                        check(&d)?;
                    }
                }
                Ok(())
            },
        )
        .unwrap_or_else(|e| panic!("{e}"));
}

/// The step relation is a set, so an enumeration may list the same element
/// twice when syntactically distinct branches collapse under
/// canonicalisation; these helpers compare enumerations as sets.
fn same_transition_sets<A: PartialEq, T: Ord>(
    left: &[(A, SubDistribution<T>)],
    right: &[(A, SubDistribution<T>)],
) -> bool {
    let subset = |xs: &[(A, SubDistribution<T>)], ys: &[(A, SubDistribution<T>)]| {
        xs.iter()
            .all(|(a, d)| ys.iter().any(|(b, e)| a == b && d.approx_eq(e, TOL)))
    };
    subset(left, right) && subset(right, left)
}

fn same_distribution_sets<T: Ord>(
    left: &[SubDistribution<T>],
    right: &[SubDistribution<T>],
) -> bool {
    let subset = |xs: &[SubDistribution<T>], ys: &[SubDistribution<T>]| {
        xs.iter().all(|d| ys.iter().any(|e| d.approx_eq(e, TOL)))
    };
    subset(left, right) && subset(right, left)
}

/// Replacing the system term by its canonical form preserves the transitions
/// up to canonicalisation of the targets.
#[test]
fn canonicalisation_preserves_transitions() {
    let mut runner = runner(0x34, 220);
    runner
        .run(&wf_network(OCC, IFC, 2, 3), |m| {
            let canon = Network {
                graph: m.graph.clone(),
                system: canonicalize(&m.system),
                defs: m.defs.clone(),
            };
            let image =
                |steps: Vec<(wnet_core::intensional::NetAction, SubDistribution<SystemTerm>)>| {
                    steps
                        .into_iter()
                        .map(|(a, d)| (a, canonical_image(&d)))
                        .collect::<Vec<_>>()
                };
            let lhs = image(net_steps(&m).map_err(|e| fail(e.to_string()))?);
            let rhs = image(net_steps(&canon).map_err(|e| fail(e.to_string()))?);
            prop_assert!(
                same_transition_sets(&lhs, &rhs),
                "canonicalising the system changed the spontaneous transitions"
            );
            for (src, ch, val) in input_probes() {
                let lhs: Vec<_> = net_input(&m, &src, &ch, val.clone())
                    .map_err(|e| fail(e.to_string()))?
                    .iter()
                    .map(canonical_image)
                    .collect();
                let rhs: Vec<_> = net_input(&canon, &src, &ch, val)
                    .map_err(|e| fail(e.to_string()))?
                    .iter()
                    .map(canonical_image)
                    .collect();
                prop_assert!(
                    same_distribution_sets(&lhs, &rhs),
                    "canonicalising the system changed an input reaction"
                );
            }
            Ok(())
        })
        .unwrap_or_else(|e| panic!("{e}"));
}
