//! Shared generators for the property suites: deterministic runners, closed
//! random states (receive binders tracked so every expression stays closed),
//! and well-formed random networks over fixed name pools.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::sample::select;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use wnet_core::prob::SubDistribution;
use wnet_core::syntax::{
    BinOp, ConnGraph, DefEnv, Expr, Name, Network, Process, Ratio, State, SystemTerm,
};

pub const TOL: f64 = 1e-9;

/// A deterministic proptest runner; every suite fixes its own seed byte.
pub fn runner(seed: u8, cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]),
    )
}

pub fn ratio() -> BoxedStrategy<Ratio> {
    (2u64..=10)
        .prop_flat_map(|den| (1..den).prop_map(move |num| Ratio::new(num, den)))
        .boxed()
}

fn channel() -> BoxedStrategy<Name> {
    select(vec![Name::new("c"), Name::new("d")]).boxed()
}

fn variable() -> BoxedStrategy<Name> {
    select(vec![Name::new("x"), Name::new("y")]).boxed()
}

/// Closed expressions over the given bound variables.
pub fn closed_expr(bound: Vec<Name>) -> BoxedStrategy<Expr> {
    let mut leaves: Vec<BoxedStrategy<Expr>> = vec![
        (-3i64..10).prop_map(Expr::Int).boxed(),
        any::<bool>().prop_map(Expr::Bool).boxed(),
    ];
    if !bound.is_empty() {
        leaves.push(select(bound).prop_map(Expr::Var).boxed());
    }
    let leaf = proptest::strategy::Union::new(leaves);
    let op = prop_oneof![
        Just(BinOp::Add),
        Just(BinOp::Sub),
        Just(BinOp::Mul),
        Just(BinOp::Eq),
        Just(BinOp::Le),
    ];
    leaf.prop_recursive(2, 8, 2, move |inner| {
        (op.clone(), inner.clone(), inner)
            .prop_map(|(o, l, r)| Expr::Bin(o, Box::new(l), Box::new(r)))
            .boxed()
    })
    .boxed()
}

/// Closed states of bounded depth; `bound` carries the receive binders in
/// scope. No recursion, so every generated state is convergent.
pub fn closed_state(depth: u32, bound: Vec<Name>) -> BoxedStrategy<State> {
    if depth == 0 {
        return prop_oneof![Just(State::Nil), Just(State::Omega)].boxed();
    }
    let broadcast = (
        channel(),
        closed_expr(bound.clone()),
        closed_proc(depth - 1, bound.clone()),
    )
        .prop_map(|(c, e, p)| State::Broadcast(c, e, p));
    let scope = bound.clone();
    let receive = (channel(), variable()).prop_flat_map(move |(c, x)| {
        let mut inner = scope.clone();
        if !inner.contains(&x) {
            inner.push(x.clone());
        }
        closed_proc(depth - 1, inner)
            .prop_map(move |p| State::Receive(c.clone(), x.clone(), p))
    });
    let tau = closed_proc(depth - 1, bound.clone()).prop_map(State::Tau);
    let sum = (
        closed_state(depth - 1, bound.clone()),
        closed_state(depth - 1, bound.clone()),
    )
        .prop_map(|(l, r)| State::sum(l, r));
    let guard = (
        closed_expr(bound.clone()),
        closed_state(depth - 1, bound.clone()),
        closed_state(depth - 1, bound),
    )
        .prop_map(|(g, t, e)| State::Match(g, Box::new(t), Box::new(e)));
    prop_oneof![
        1 => Just(State::Nil),
        1 => Just(State::Omega),
        3 => broadcast,
        3 => receive,
        2 => tau,
        2 => sum,
        1 => guard,
    ]
    .boxed()
}

pub fn closed_proc(depth: u32, bound: Vec<Name>) -> BoxedStrategy<Process> {
    let leaf = closed_state(depth, bound.clone()).prop_map(Process::leaf);
    let choice = (
        closed_state(depth, bound.clone()),
        ratio(),
        closed_state(depth, bound),
    )
        .prop_map(|(l, p, r)| Process::choice(Process::leaf(l), p, Process::leaf(r)));
    prop_oneof![2 => leaf, 1 => choice].boxed()
}

/// A well-formed network: occupied nodes drawn from `occupied_pool` (at
/// least one), interface vertices from `interface_pool`, random edges that
/// always touch an occupied node, and a forced edge for any interface
/// vertex the random choices left isolated.
pub fn wf_network(
    occupied_pool: &'static [&'static str],
    interface_pool: &'static [&'static str],
    max_nodes: usize,
    state_depth: u32,
) -> BoxedStrategy<Network> {
    let occ = proptest::sample::subsequence(occupied_pool.to_vec(), 1..=max_nodes);
    let ifc = proptest::sample::subsequence(interface_pool.to_vec(), 0..=interface_pool.len());
    (occ, ifc)
        .prop_flat_map(move |(occ, ifc)| {
            let occ: Vec<Name> = occ.iter().map(|s| Name::new(s)).collect();
            let ifc: Vec<Name> = ifc
                .iter()
                .map(|s| Name::new(s))
                .filter(|n| !occ.contains(n))
                .collect();
            let mut candidates: Vec<(Name, Name)> = Vec::new();
            for a in &occ {
                for b in &occ {
                    if a != b {
                        candidates.push((a.clone(), b.clone()));
                    }
                }
                for v in &ifc {
                    candidates.push((a.clone(), v.clone()));
                    candidates.push((v.clone(), a.clone()));
                }
            }
            let n_states = occ.len();
            (
                Just(occ),
                Just(ifc),
                Just(candidates.clone()),
                proptest::collection::vec(any::<bool>(), candidates.len()),
                proptest::collection::vec(closed_state(state_depth, Vec::new()), n_states),
            )
        })
        .prop_map(|(occ, ifc, candidates, picks, states)| {
            let mut graph = ConnGraph::new();
            for v in occ.iter().chain(&ifc) {
                graph.add_vertex(v.clone());
            }
            for ((f, t), keep) in candidates.iter().zip(&picks) {
                if *keep && !graph.connected(f, t) {
                    graph.add_edge(f.clone(), t.clone());
                }
            }
            // well-formedness demands no isolated interface vertex
            for v in &ifc {
                let isolated = !occ
                    .iter()
                    .any(|o| graph.connected(o, v) || graph.connected(v, o));
                if isolated {
                    graph.add_edge(occ[0].clone(), v.clone());
                }
            }
            let system = SystemTerm::par_all(
                occ.iter()
                    .cloned()
                    .zip(states)
                    .map(|(n, s)| SystemTerm::Node(n, s)),
            );
            Network {
                graph,
                system,
                defs: DefEnv::new(),
            }
        })
        .boxed()
}

/// Multiset equality of labelled transition lists, with distributions
/// compared up to tolerance.
pub fn same_transitions<A: PartialEq, T: Ord>(
    left: &[(A, SubDistribution<T>)],
    right: &[(A, SubDistribution<T>)],
) -> bool {
    if left.len() != right.len() {
        return false;
    }
    let mut used = vec![false; right.len()];
    'outer: for (a, d) in left {
        for (i, (b, e)) in right.iter().enumerate() {
            if !used[i] && a == b && d.approx_eq(e, TOL) {
                used[i] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Multiset equality of plain distribution lists.
pub fn same_distributions<T: Ord>(
    left: &[SubDistribution<T>],
    right: &[SubDistribution<T>],
) -> bool {
    if left.len() != right.len() {
        return false;
    }
    let mut used = vec![false; right.len()];
    'outer: for d in left {
        for (i, e) in right.iter().enumerate() {
            if !used[i] && d.approx_eq(e, TOL) {
                used[i] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}
