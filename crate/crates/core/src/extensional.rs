//! The extensional semantics: what an observer connected to the interface
//! can see of a network. Internal activity (including broadcasts that reach
//! no interface vertex) collapses to τ, broadcasts reaching the interface
//! become multicast outputs towards the set of reachable output vertices,
//! and input vertices can inject values. On top of it: explicit probabilistic
//! transition systems over canonical network states, convergence analysis
//! and the deadlock predicate.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::intensional::{NetAction, SemanticsError, StepEngine};
use crate::prob::SubDistribution;
use crate::syntax::{
    canonicalize, interface, ConnGraph, DefEnv, Name, Network, Process, State, SystemTerm, Val,
};

/// Default cap on the number of canonical states explored by [`build_plts`].
pub const DEFAULT_STATE_BOUND: usize = 200_000;

/// An action visible at the interface of a network.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExtAction {
    /// Internal activity, including broadcasts nobody outside can hear.
    Tau,
    /// A value arriving on a channel from an input vertex: (source, channel, value).
    In(Name, Name, Val),
    /// A broadcast reaching the non-empty set η of output vertices:
    /// (channel, value, η).
    Out(Name, Val, BTreeSet<Name>),
}

impl fmt::Display for ExtAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtAction::Tau => write!(f, "tau"),
            ExtAction::In(n, c, v) => write!(f, "in {n}.{c}?{v}"),
            ExtAction::Out(c, v, eta) => {
                write!(f, "out {c}!{v}>{{")?;
                for (i, n) in eta.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{n}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// Errors raised while building an explicit transition system.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtError {
    #[error("state space exceeded the configured bound of {bound} states")]
    StateSpaceExceeded { bound: usize },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// The finite input vocabulary used to approximate the (value-infinite)
/// input actions of the semantics: a value set per input vertex and the
/// channels on which injections are attempted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Alphabet {
    /// Candidate values per input vertex.
    pub values: BTreeMap<Name, BTreeSet<Val>>,
    /// Channels on which input vertices inject values.
    pub channels: BTreeSet<Name>,
}

impl Alphabet {
    pub fn empty() -> Self {
        Self::default()
    }

    fn values_at(&self, node: &Name) -> impl Iterator<Item = Val> + '_ {
        self.values.get(node).into_iter().flatten().copied()
    }
}

fn walk_process(p: &Process, chans: &mut BTreeSet<Name>, vals: &mut BTreeSet<Val>) {
    match p {
        Process::StateLeaf(s) => walk_state(s, chans, vals),
        Process::PChoice(l, _, r) => {
            walk_process(l, chans, vals);
            walk_process(r, chans, vals);
        }
    }
}

fn walk_state(s: &State, chans: &mut BTreeSet<Name>, vals: &mut BTreeSet<Val>) {
    match s {
        State::Broadcast(c, e, p) => {
            chans.insert(c.clone());
            if e.is_closed() {
                vals.insert(e.eval());
            }
            walk_process(p, chans, vals);
        }
        State::Receive(c, _, p) => {
            chans.insert(c.clone());
            walk_process(p, chans, vals);
        }
        State::Sum(l, r) | State::Match(_, l, r) => {
            walk_state(l, chans, vals);
            walk_state(r, chans, vals);
        }
        State::Tau(p) => walk_process(p, chans, vals),
        State::Call(..) | State::Omega | State::Nil => {}
    }
}

/// The default input vocabulary for a set of networks under analysis: every
/// value that is syntactically broadcast anywhere (closed payloads only),
/// plus one fresh value per input vertex as a witness for the class of
/// values the networks cannot produce themselves. An approximation — the
/// semantics quantifies over all values — so tools flag whenever it is used.
pub fn default_alphabet(nets: &[&Network]) -> Alphabet {
    let mut chans = BTreeSet::new();
    let mut vals = BTreeSet::new();
    let mut input_nodes = BTreeSet::new();
    for net in nets {
        for (_, s) in net.system.components() {
            walk_state(&s, &mut chans, &mut vals);
        }
        for (_, (_, body)) in net.defs.iter() {
            walk_state(body, &mut chans, &mut vals);
        }
        let (inp, _) = interface(net);
        input_nodes.extend(inp);
    }
    let mut fresh = vals
        .iter()
        .filter_map(|v| match v {
            Val::Int(i) => Some(*i),
            Val::Bool(_) => None,
        })
        .max()
        .unwrap_or(0)
        + 1;
    let mut values = BTreeMap::new();
    for node in input_nodes {
        let mut set = vals.clone();
        set.insert(Val::Int(fresh));
        fresh += 1;
        values.insert(node, set);
    }
    Alphabet {
        values,
        channels: chans,
    }
}

/// Maps a network-level action to its extensional appearance for a sender
/// with the given unoccupied out-neighbourhood.
fn extensional_label(act: &NetAction, graph: &ConnGraph, occupied: &BTreeSet<Name>) -> ExtAction {
    match act {
        NetAction::NTau(_) => ExtAction::Tau,
        NetAction::NOut(sender, c, v) => {
            let eta: BTreeSet<Name> = graph
                .out_neighbors(sender)
                .into_iter()
                .filter(|x| !occupied.contains(x))
                .collect();
            if eta.is_empty() {
                ExtAction::Tau
            } else {
                ExtAction::Out(c.clone(), *v, eta)
            }
        }
        NetAction::NIn(source, c, v) => ExtAction::In(source.clone(), c.clone(), *v),
    }
}

/// The extensional transitions of a network: τ for internal activity,
/// multicast outputs towards the interface, and one input transition per
/// input vertex, channel and alphabet value. ω-successful networks have no
/// transitions. Targets are canonical.
pub fn ext_steps(
    net: &Network,
    alphabet: &Alphabet,
) -> Result<Vec<(ExtAction, SubDistribution<Network>)>, SemanticsError> {
    let mut engine = StepEngine::new(&net.defs);
    if engine.omega_pred(net) {
        return Ok(Vec::new());
    }
    let occupied = net.nodes();
    let (inputs, _) = interface(net);
    let mut out: Vec<(ExtAction, SubDistribution<Network>)> = Vec::new();
    let push = |acc: &mut Vec<(ExtAction, SubDistribution<Network>)>,
                    a: ExtAction,
                    d: SubDistribution<SystemTerm>| {
        let nets = d.map_image(|sys| Network {
            graph: net.graph.clone(),
            system: canonicalize(sys),
            defs: net.defs.clone(),
        });
        let step = (a, nets);
        if !acc.contains(&step) {
            acc.push(step);
        }
    };
    for (act, delta) in engine.net_steps(net)? {
        let label = extensional_label(&act, &net.graph, &occupied);
        push(&mut out, label, delta);
    }
    for source in &inputs {
        for c in &alphabet.channels {
            for v in alphabet.values_at(source) {
                for delta in engine.net_input(net, source, c, v)? {
                    push(
                        &mut out,
                        ExtAction::In(source.clone(), c.clone(), v),
                        delta,
                    );
                }
            }
        }
    }
    Ok(out)
}

/// True iff the network is neither successful nor able to perform any τ or
/// output extensional action: nothing will ever happen without external
/// stimulus and no success was reached.
pub fn deadlocked(net: &Network) -> Result<bool, SemanticsError> {
    let mut engine = StepEngine::new(&net.defs);
    if engine.omega_pred(net) {
        return Ok(false);
    }
    Ok(engine.net_steps(net)?.is_empty())
}

/// The immutable data shared by all states discovered from one root: its
/// graph, definitions, occupied nodes and interface.
#[derive(Debug, Clone, PartialEq)]
struct Context {
    graph: ConnGraph,
    defs: DefEnv,
    occupied: BTreeSet<Name>,
    inputs: BTreeSet<Name>,
    outputs: BTreeSet<Name>,
}

/// An explicit probabilistic transition system over canonical network
/// states: the closure of a set of root networks under extensional steps.
///
/// States are pairs of a context (graph and definitions, constant along
/// transitions) and a canonical system term; ω-successful states carry a
/// flag and are absorbing.
#[derive(Debug, Clone)]
pub struct Plts {
    contexts: Vec<Context>,
    states: Vec<(usize, SystemTerm)>,
    transitions: Vec<Vec<(ExtAction, SubDistribution<usize>)>>,
    omega: Vec<bool>,
    roots: Vec<usize>,
    alphabet: Alphabet,
}

impl Plts {
    /// Number of states.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State indices of the roots, in the order they were given.
    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn omega(&self, i: usize) -> bool {
        self.omega[i]
    }

    pub fn transitions(&self, i: usize) -> &[(ExtAction, SubDistribution<usize>)] {
        &self.transitions[i]
    }

    pub fn system(&self, i: usize) -> &SystemTerm {
        &self.states[i].1
    }

    /// Identifier of the context (graph + definitions) a state belongs to;
    /// states reachable from one root share its context.
    pub fn context_id(&self, i: usize) -> usize {
        self.states[i].0
    }

    pub fn graph_of(&self, i: usize) -> &ConnGraph {
        &self.contexts[self.states[i].0].graph
    }

    pub fn inputs_of(&self, i: usize) -> &BTreeSet<Name> {
        &self.contexts[self.states[i].0].inputs
    }

    pub fn outputs_of(&self, i: usize) -> &BTreeSet<Name> {
        &self.contexts[self.states[i].0].outputs
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Reconstructs the full network a state stands for.
    pub fn network(&self, i: usize) -> Network {
        let ctx = &self.contexts[self.states[i].0];
        Network {
            graph: ctx.graph.clone(),
            system: self.states[i].1.clone(),
            defs: ctx.defs.clone(),
        }
    }

    /// True iff the state is neither successful nor has any τ or output
    /// transition.
    pub fn deadlocked_state(&self, i: usize) -> bool {
        !self.omega[i]
            && self.transitions[i]
                .iter()
                .all(|(a, _)| matches!(a, ExtAction::In(..)))
    }

    /// The states from which all probability can be lost to internal
    /// divergence: the greatest set W of non-successful states each of which
    /// has a τ-transition staying entirely inside W.
    pub fn divergent_states(&self) -> BTreeSet<usize> {
        let mut w: BTreeSet<usize> = (0..self.len())
            .filter(|&i| !self.omega[i])
            .collect();
        loop {
            let next: BTreeSet<usize> = w
                .iter()
                .copied()
                .filter(|&i| {
                    self.transitions[i].iter().any(|(a, d)| {
                        *a == ExtAction::Tau && d.support().all(|t| w.contains(t))
                    })
                })
                .collect();
            if next.len() == w.len() {
                return w;
            }
            w = next;
        }
    }

    /// True iff no state can lose probability mass to divergence.
    pub fn is_convergent(&self) -> bool {
        self.divergent_states().is_empty()
    }
}

/// Convenience wrapper for [`Plts::is_convergent`].
pub fn is_convergent(p: &Plts) -> bool {
    p.is_convergent()
}

/// Explores the extensional transition system reachable from the given
/// roots, interning canonical states, up to `bound` states. Roots sharing a
/// graph and definitions also share states.
pub fn build_plts(roots: &[Network], alphabet: &Alphabet, bound: usize) -> Result<Plts, ExtError> {
    let mut contexts: Vec<Context> = Vec::new();
    let mut ctx_roots: Vec<(usize, SystemTerm)> = Vec::new();
    for root in roots {
        let (inputs, outputs) = interface(root);
        let ctx = Context {
            graph: root.graph.clone(),
            defs: root.defs.clone(),
            occupied: root.nodes(),
            inputs,
            outputs,
        };
        let k = match contexts.iter().position(|c| *c == ctx) {
            Some(k) => k,
            None => {
                contexts.push(ctx);
                contexts.len() - 1
            }
        };
        ctx_roots.push((k, canonicalize(&root.system)));
    }

    let mut states: Vec<(usize, SystemTerm)> = Vec::new();
    let mut index: BTreeMap<(usize, SystemTerm), usize> = BTreeMap::new();
    let mut transitions: Vec<Option<Vec<(ExtAction, SubDistribution<usize>)>>> = Vec::new();
    let mut omega = Vec::new();
    let mut root_ids = Vec::new();

    fn intern(
        key: (usize, SystemTerm),
        states: &mut Vec<(usize, SystemTerm)>,
        index: &mut BTreeMap<(usize, SystemTerm), usize>,
        transitions: &mut Vec<Option<Vec<(ExtAction, SubDistribution<usize>)>>>,
        omega: &mut Vec<bool>,
        bound: usize,
    ) -> Result<(usize, bool), ExtError> {
        if let Some(&i) = index.get(&key) {
            return Ok((i, false));
        }
        if states.len() >= bound {
            return Err(ExtError::StateSpaceExceeded { bound });
        }
        let i = states.len();
        states.push(key.clone());
        index.insert(key, i);
        transitions.push(None);
        omega.push(false);
        Ok((i, true))
    }

    for (k, sys) in &ctx_roots {
        let (i, _) = intern(
            (*k, sys.clone()),
            &mut states,
            &mut index,
            &mut transitions,
            &mut omega,
            bound,
        )?;
        root_ids.push(i);
    }

    for (k, ctx) in contexts.iter().enumerate() {
        let mut engine = StepEngine::new(&ctx.defs);
        let mut scratch = Network {
            graph: ctx.graph.clone(),
            system: SystemTerm::Nil,
            // the engine carries the definitions; the scratch copy is only
            // a vehicle for graph and system
            defs: DefEnv::new(),
        };
        let mut queue: VecDeque<usize> = root_ids
            .iter()
            .copied()
            .filter(|&i| states[i].0 == k)
            .collect();
        while let Some(i) = queue.pop_front() {
            if transitions[i].is_some() {
                continue;
            }
            scratch.system = states[i].1.clone();
            if engine.omega_pred(&scratch) {
                omega[i] = true;
                transitions[i] = Some(Vec::new());
                continue;
            }
            let mut steps: Vec<(ExtAction, SubDistribution<usize>)> = Vec::new();
            let mut raw: Vec<(ExtAction, SubDistribution<SystemTerm>)> = Vec::new();
            for (act, delta) in engine.net_steps(&scratch)? {
                let label = extensional_label(&act, &ctx.graph, &ctx.occupied);
                raw.push((label, delta));
            }
            for source in &ctx.inputs {
                for c in &alphabet.channels {
                    for v in alphabet.values_at(source) {
                        for delta in engine.net_input(&scratch, source, c, v)? {
                            raw.push((ExtAction::In(source.clone(), c.clone(), v), delta));
                        }
                    }
                }
            }
            for (label, delta) in raw {
                let mut interned: Vec<(usize, f64)> = Vec::new();
                for (sys, p) in delta.map_image(canonicalize).iter() {
                    let (j, fresh) = intern(
                        (k, sys.clone()),
                        &mut states,
                        &mut index,
                        &mut transitions,
                        &mut omega,
                        bound,
                    )?;
                    if fresh {
                        queue.push_back(j);
                    }
                    interned.push((j, p));
                }
                let dist = SubDistribution::from_entries(interned)
                    .expect("transition distributions have mass at most one");
                let step = (label, dist);
                if !steps.contains(&step) {
                    steps.push(step);
                }
            }
            transitions[i] = Some(steps);
        }
    }

    Ok(Plts {
        contexts,
        states,
        transitions: transitions
            .into_iter()
            .map(|t| t.expect("every interned state gets expanded"))
            .collect(),
        omega,
        roots: root_ids,
        alphabet: alphabet.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{Expr, Ratio};

    fn named(n: &str) -> Name {
        Name::new(n)
    }

    fn chan(c: &str) -> Name {
        Name::new(c)
    }

    /// ⟦c!⟨1⟩.0⟧ₘ with m → o1, m → o2.
    fn multicast_net() -> Network {
        let mut g = ConnGraph::new();
        g.add_edge(named("m"), named("o1"));
        g.add_edge(named("m"), named("o2"));
        let s = State::broadcast("c", Expr::Int(1), Process::leaf(State::Nil));
        Network::new(g, SystemTerm::node("m", s), DefEnv::new())
    }

    #[test]
    fn broadcast_reaching_interface_is_multicast_output() {
        let net = multicast_net();
        let steps = ext_steps(&net, &Alphabet::empty()).unwrap();
        assert_eq!(steps.len(), 1);
        match &steps[0].0 {
            ExtAction::Out(c, Val::Int(1), eta) => {
                assert_eq!(c, &chan("c"));
                assert_eq!(eta, &BTreeSet::from([named("o1"), named("o2")]));
            }
            other => panic!("unexpected action {other}"),
        }
    }

    #[test]
    fn internal_broadcast_is_tau() {
        // m broadcasts only towards the occupied node n
        let mut g = ConnGraph::new();
        g.add_edge(named("m"), named("n"));
        let sys = SystemTerm::par_all([
            SystemTerm::node("m", State::broadcast("c", Expr::Int(1), Process::leaf(State::Nil))),
            SystemTerm::node("n", State::receive("c", "x", Process::leaf(State::Omega))),
        ]);
        let net = Network::new(g, sys, DefEnv::new());
        let steps = ext_steps(&net, &Alphabet::empty()).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].0, ExtAction::Tau);
        // the listener turned into ω
        let target = steps[0].1.support().next().unwrap().clone();
        let mut engine = StepEngine::new(&target.defs);
        assert!(engine.omega_pred(&target));
    }

    #[test]
    fn successful_networks_have_no_extensional_steps() {
        let mut g = ConnGraph::new();
        g.add_vertex(named("m"));
        let net = Network::new(g, SystemTerm::node("m", State::Omega), DefEnv::new());
        assert!(ext_steps(&net, &Alphabet::empty()).unwrap().is_empty());
    }

    #[test]
    fn inputs_range_over_the_alphabet() {
        let mut g = ConnGraph::new();
        g.add_edge(named("e"), named("n"));
        let net = Network::new(
            g,
            SystemTerm::node("n", State::receive("c", "x", Process::leaf(State::Omega))),
            DefEnv::new(),
        );
        let alphabet = default_alphabet(&[&net]);
        // nothing is broadcast, so the vocabulary is just the fresh witness
        assert_eq!(alphabet.channels, BTreeSet::from([chan("c")]));
        assert_eq!(alphabet.values[&named("e")].len(), 1);
        let steps = ext_steps(&net, &alphabet).unwrap();
        assert_eq!(steps.len(), 1);
        assert!(matches!(&steps[0].0, ExtAction::In(src, c, _) if *src == named("e") && *c == chan("c")));
    }

    #[test]
    fn ext_targets_are_node_stable() {
        let net = multicast_net();
        for (_, d) in ext_steps(&net, &Alphabet::empty()).unwrap() {
            for t in d.support() {
                assert_eq!(t.nodes(), net.nodes());
                assert_eq!(t.graph, net.graph);
            }
        }
    }

    /// The fair-coin machine: H ⇐ τ.(H ⊕½ ω̂).
    fn coin_net() -> Network {
        let mut defs = DefEnv::new();
        defs.insert(
            named("H"),
            alloc::vec::Vec::new(),
            State::tau(Process::choice(
                Process::leaf(State::Call(named("H"), alloc::vec::Vec::new())),
                Ratio::new(1, 2),
                Process::leaf(State::Omega),
            )),
        );
        let mut g = ConnGraph::new();
        g.add_vertex(named("m"));
        Network::new(
            g,
            SystemTerm::node("m", State::Call(named("H"), alloc::vec::Vec::new())),
            defs,
        )
    }

    #[test]
    fn coin_plts_has_two_states_and_converges() {
        let net = coin_net();
        let p = build_plts(&[net], &Alphabet::empty(), DEFAULT_STATE_BOUND).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.transitions(p.roots()[0]).len(), 1);
        let omegas: Vec<bool> = (0..p.len()).map(|i| p.omega(i)).collect();
        assert_eq!(omegas.iter().filter(|b| **b).count(), 1);
        // ω-states are absorbing
        for i in 0..p.len() {
            if p.omega(i) {
                assert!(p.transitions(i).is_empty());
            }
        }
        // the coin eventually leaves every candidate divergence set
        assert!(p.is_convergent());
    }

    #[test]
    fn self_looping_tau_diverges() {
        let mut defs = DefEnv::new();
        defs.insert(
            named("Div"),
            alloc::vec::Vec::new(),
            State::tau(Process::leaf(State::Call(named("Div"), alloc::vec::Vec::new()))),
        );
        let mut g = ConnGraph::new();
        g.add_vertex(named("m"));
        let net = Network::new(
            g,
            SystemTerm::node("m", State::Call(named("Div"), alloc::vec::Vec::new())),
            defs,
        );
        let p = build_plts(&[net], &Alphabet::empty(), DEFAULT_STATE_BOUND).unwrap();
        assert_eq!(p.len(), 1);
        assert!(!p.is_convergent());
        assert_eq!(p.divergent_states(), BTreeSet::from([0]));
    }

    #[test]
    fn deadlock_predicate() {
        let mut g = ConnGraph::new();
        g.add_vertex(named("m"));
        let nil = Network::new(g.clone(), SystemTerm::node("m", State::Nil), DefEnv::new());
        assert!(deadlocked(&nil).unwrap());
        let success = Network::new(g.clone(), SystemTerm::node("m", State::Omega), DefEnv::new());
        assert!(!deadlocked(&success).unwrap());
        let sender = Network::new(
            g,
            SystemTerm::node("m", State::broadcast("c", Expr::Int(0), Process::leaf(State::Nil))),
            DefEnv::new(),
        );
        assert!(!deadlocked(&sender).unwrap());
    }

    #[test]
    fn exploration_respects_the_state_bound() {
        // A(n) ⇐ c!⟨n⟩.A(n+1): infinitely many states
        let mut defs = DefEnv::new();
        defs.insert(
            named("A"),
            alloc::vec![named("n")],
            State::broadcast(
                "c",
                Expr::Var(named("n")),
                Process::leaf(State::Call(
                    named("A"),
                    alloc::vec![Expr::Bin(
                        crate::syntax::BinOp::Add,
                        alloc::boxed::Box::new(Expr::Var(named("n"))),
                        alloc::boxed::Box::new(Expr::Int(1)),
                    )],
                )),
            ),
        );
        let mut g = ConnGraph::new();
        g.add_vertex(named("m"));
        let net = Network::new(
            g,
            SystemTerm::node("m", State::Call(named("A"), alloc::vec![Expr::Int(0)])),
            defs,
        );
        let err = build_plts(&[net], &Alphabet::empty(), 10).unwrap_err();
        assert_eq!(err, ExtError::StateSpaceExceeded { bound: 10 });
    }

    #[test]
    fn deadlocked_flag_in_plts() {
        let mut g = ConnGraph::new();
        g.add_edge(named("e"), named("n"));
        let net = Network::new(
            g,
            SystemTerm::node("n", State::receive("c", "x", Process::leaf(State::Omega))),
            DefEnv::new(),
        );
        let alphabet = default_alphabet(&[&net]);
        let p = build_plts(&[net], &alphabet, DEFAULT_STATE_BOUND).unwrap();
        let root = p.roots()[0];
        // only input transitions: deadlocked in the δ sense
        assert!(p.deadlocked_state(root));
        assert!(!p.transitions(root).is_empty());
    }
}
