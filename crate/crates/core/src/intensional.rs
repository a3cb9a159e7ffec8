//! The two-level intensional semantics: a pre-semantics for states
//! (broadcast, receive and internal steps of sequential code) and on top of
//! it the transition relation of networks, where one node's broadcast is
//! synchronised with the input responses of everyone else. Also the success
//! predicate on networks and the reduction relation used by testing.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::prob::{product_image, SubDistribution};
use crate::syntax::{canonicalize, DefEnv, Name, Network, Process, State, SystemTerm, Val};

/// Actions of the state pre-semantics.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum StateAction {
    Out(Name, Val),
    In(Name, Val),
    Tau,
}

/// Actions of the network semantics: internal activity of a node, a
/// broadcast by a node, or a value arriving from an outside source node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum NetAction {
    NTau(Name),
    NOut(Name, Name, Val),
    NIn(Name, Name, Val),
}

impl fmt::Display for NetAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetAction::NTau(n) => write!(f, "{n}.tau"),
            NetAction::NOut(n, c, v) => write!(f, "{n}.{c}!{v}"),
            NetAction::NIn(n, c, v) => write!(f, "{n}.{c}?{v}"),
        }
    }
}

/// Errors raised while deriving transitions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemanticsError {
    #[error("definition {0} is not bound")]
    UnboundDefinition(Name),
    #[error("definition {name} expects {expected} arguments, got {got}")]
    ArityMismatch {
        name: Name,
        expected: usize,
        got: usize,
    },
    #[error("input source {0} is an internal node")]
    SourceIsInternal(Name),
}

type StepSet = Vec<(StateAction, SubDistribution<State>)>;

/// Derives transitions against a fixed definition environment, memoizing
/// definition unfoldings per (name, argument values).
pub struct StepEngine<'a> {
    defs: &'a DefEnv,
    step_cache: BTreeMap<(Name, Vec<Val>), StepSet>,
    recv_cache: BTreeMap<(Name, Vec<Val>, Name, Val), Vec<SubDistribution<State>>>,
    omega_cache: BTreeMap<(Name, Vec<Val>), bool>,
}

impl<'a> StepEngine<'a> {
    pub fn new(defs: &'a DefEnv) -> Self {
        StepEngine {
            defs,
            step_cache: BTreeMap::new(),
            recv_cache: BTreeMap::new(),
            omega_cache: BTreeMap::new(),
        }
    }

    fn unfold(&self, name: &Name, args: &[Val]) -> Result<State, SemanticsError> {
        let Some((params, body)) = self.defs.get(name) else {
            return Err(SemanticsError::UnboundDefinition(name.clone()));
        };
        if params.len() != args.len() {
            return Err(SemanticsError::ArityMismatch {
                name: name.clone(),
                expected: params.len(),
                got: args.len(),
            });
        }
        let mut s = body.clone();
        for (p, v) in params.iter().zip(args) {
            s = s.subst(p, *v);
        }
        Ok(s)
    }

    /// All τ and broadcast transitions of a closed state.
    ///
    /// Success states contribute nothing: no rule is defined for ω.
    /// Unguarded recursion contributes nothing either (the transition
    /// relation is the least fixed point of the rules).
    pub fn state_steps(&mut self, s: &State) -> Result<StepSet, SemanticsError> {
        let mut in_progress = BTreeSet::new();
        self.steps_rec(s, &mut in_progress)
    }

    fn steps_rec(
        &mut self,
        s: &State,
        in_progress: &mut BTreeSet<(Name, Vec<Val>)>,
    ) -> Result<StepSet, SemanticsError> {
        match s {
            State::Broadcast(c, e, p) => Ok(vec![(
                StateAction::Out(c.clone(), e.eval()),
                crate::syntax::interpret(p),
            )]),
            State::Tau(p) => Ok(vec![(StateAction::Tau, crate::syntax::interpret(p))]),
            State::Sum(l, r) => {
                let mut out = self.steps_rec(l, in_progress)?;
                for step in self.steps_rec(r, in_progress)? {
                    if !out.contains(&step) {
                        out.push(step);
                    }
                }
                Ok(out)
            }
            State::Match(b, l, r) => {
                if b.eval().as_bool() {
                    self.steps_rec(l, in_progress)
                } else {
                    self.steps_rec(r, in_progress)
                }
            }
            State::Call(a, args) => {
                let vals: Vec<Val> = args.iter().map(|e| e.eval()).collect();
                let key = (a.clone(), vals);
                if let Some(cached) = self.step_cache.get(&key) {
                    return Ok(cached.clone());
                }
                if !in_progress.insert(key.clone()) {
                    return Ok(Vec::new());
                }
                let body = self.unfold(a, &key.1)?;
                let steps = self.steps_rec(&body, in_progress)?;
                in_progress.remove(&key);
                self.step_cache.insert(key, steps.clone());
                Ok(steps)
            }
            State::Receive(..) | State::Omega | State::Nil => Ok(Vec::new()),
        }
    }

    /// All derivations of a `c?v` transition of a closed state; the empty
    /// set encodes that the state cannot receive (premise of rule (deaf)).
    pub fn state_receives(
        &mut self,
        s: &State,
        c: &Name,
        v: Val,
    ) -> Result<Vec<SubDistribution<State>>, SemanticsError> {
        let mut in_progress = BTreeSet::new();
        self.receives_rec(s, c, v, &mut in_progress)
    }

    fn receives_rec(
        &mut self,
        s: &State,
        c: &Name,
        v: Val,
        in_progress: &mut BTreeSet<(Name, Vec<Val>)>,
    ) -> Result<Vec<SubDistribution<State>>, SemanticsError> {
        match s {
            State::Receive(c2, x, p) if c2 == c => {
                let mut body = p.clone();
                body = subst_process(&body, x, v);
                Ok(vec![crate::syntax::interpret(&body)])
            }
            State::Receive(..) => Ok(Vec::new()),
            State::Sum(l, r) => {
                let mut out = self.receives_rec(l, c, v, in_progress)?;
                for d in self.receives_rec(r, c, v, in_progress)? {
                    if !out.contains(&d) {
                        out.push(d);
                    }
                }
                Ok(out)
            }
            State::Match(b, l, r) => {
                if b.eval().as_bool() {
                    self.receives_rec(l, c, v, in_progress)
                } else {
                    self.receives_rec(r, c, v, in_progress)
                }
            }
            State::Call(a, args) => {
                let vals: Vec<Val> = args.iter().map(|e| e.eval()).collect();
                let key = (a.clone(), vals.clone(), c.clone(), v);
                if let Some(cached) = self.recv_cache.get(&key) {
                    return Ok(cached.clone());
                }
                let guard = (a.clone(), vals);
                if !in_progress.insert(guard.clone()) {
                    return Ok(Vec::new());
                }
                let body = self.unfold(a, &guard.1)?;
                let ds = self.receives_rec(&body, c, v, in_progress)?;
                in_progress.remove(&guard);
                self.recv_cache.insert(key, ds.clone());
                Ok(ds)
            }
            State::Broadcast(..) | State::Tau(..) | State::Omega | State::Nil => Ok(Vec::new()),
        }
    }

    /// All τ and broadcast transitions of a network. A broadcast by node n
    /// simultaneously updates every node in n's transmission range that can
    /// receive; everyone else keeps its state.
    pub fn net_steps(
        &mut self,
        net: &Network,
    ) -> Result<Vec<(NetAction, SubDistribution<SystemTerm>)>, SemanticsError> {
        let comps = net.system.components();
        let names: Vec<Name> = comps.iter().map(|(n, _)| n.clone()).collect();
        let mut out = Vec::new();
        for (i, (node, state)) in comps.iter().enumerate() {
            for (action, delta) in self.state_steps(state)? {
                match action {
                    StateAction::Tau => {
                        let mut parts: Vec<Vec<SubDistribution<State>>> = comps
                            .iter()
                            .map(|(_, s)| vec![SubDistribution::point(s.clone())])
                            .collect();
                        parts[i] = vec![delta.clone()];
                        for target in combine(&names, &parts) {
                            out.push((NetAction::NTau(node.clone()), target));
                        }
                    }
                    StateAction::Out(c, v) => {
                        let mut parts: Vec<Vec<SubDistribution<State>>> = Vec::new();
                        for (j, (other, s)) in comps.iter().enumerate() {
                            if j == i {
                                parts.push(vec![delta.clone()]);
                            } else {
                                parts.push(self.input_choices(net, node, other, s, &c, v)?);
                            }
                        }
                        for target in combine(&names, &parts) {
                            out.push((NetAction::NOut(node.clone(), c.clone(), v), target));
                        }
                    }
                    StateAction::In(..) => unreachable!("pre-semantics yields no inputs here"),
                }
            }
        }
        Ok(out)
    }

    /// Possible responses of the node `at` (running `s`) to value `v`
    /// broadcast on channel `c` by `from`: the receive derivations when
    /// connected and listening, otherwise the unchanged state (rules
    /// (deaf) and (disc)).
    fn input_choices(
        &mut self,
        net: &Network,
        from: &Name,
        at: &Name,
        s: &State,
        c: &Name,
        v: Val,
    ) -> Result<Vec<SubDistribution<State>>, SemanticsError> {
        if !net.graph.connected(from, at) {
            return Ok(vec![SubDistribution::point(s.clone())]);
        }
        let recvs = self.state_receives(s, c, v)?;
        if recvs.is_empty() {
            Ok(vec![SubDistribution::point(s.clone())])
        } else {
            Ok(recvs)
        }
    }

    /// The responses of a whole network to `v` broadcast on `c` by the
    /// external source `from`: one distribution per combination of receive
    /// derivations. Total — every node receives, is deaf, or is out of
    /// range.
    pub fn net_input(
        &mut self,
        net: &Network,
        from: &Name,
        c: &Name,
        v: Val,
    ) -> Result<Vec<SubDistribution<SystemTerm>>, SemanticsError> {
        if net.nodes().contains(from) {
            return Err(SemanticsError::SourceIsInternal(from.clone()));
        }
        let comps = net.system.components();
        let names: Vec<Name> = comps.iter().map(|(n, _)| n.clone()).collect();
        let mut parts = Vec::new();
        for (node, s) in &comps {
            parts.push(self.input_choices(net, from, node, s, c, v)?);
        }
        Ok(combine(&names, &parts))
    }

    /// True when some node's code exposes ω as a top-level summand, through
    /// sums, resolved guards and definition unfolding.
    pub fn omega_pred(&mut self, net: &Network) -> bool {
        net.system
            .components()
            .iter()
            .any(|(_, s)| self.exposes_omega(s, &mut BTreeSet::new()))
    }

    fn exposes_omega(&mut self, s: &State, in_progress: &mut BTreeSet<(Name, Vec<Val>)>) -> bool {
        match s {
            State::Omega => true,
            State::Sum(l, r) => {
                self.exposes_omega(l, in_progress) || self.exposes_omega(r, in_progress)
            }
            State::Match(b, l, r) => {
                if b.eval().as_bool() {
                    self.exposes_omega(l, in_progress)
                } else {
                    self.exposes_omega(r, in_progress)
                }
            }
            State::Call(a, args) => {
                let vals: Vec<Val> = args.iter().map(|e| e.eval()).collect();
                let key = (a.clone(), vals);
                if let Some(&cached) = self.omega_cache.get(&key) {
                    return cached;
                }
                if !in_progress.insert(key.clone()) {
                    return false;
                }
                let result = match self.unfold(a, &key.1) {
                    Ok(body) => self.exposes_omega(&body, in_progress),
                    Err(_) => false,
                };
                in_progress.remove(&key);
                self.omega_cache.insert(key, result);
                result
            }
            _ => false,
        }
    }

    /// The reductions of a network: every τ transition and every broadcast,
    /// whether or not the broadcast reaches the interface. Targets share
    /// the source's graph and definitions.
    pub fn reduce(&mut self, net: &Network) -> Result<Vec<SubDistribution<Network>>, SemanticsError> {
        let mut out = Vec::new();
        for (_, delta) in self.net_steps(net)? {
            out.push(delta.map_image(|sys| Network {
                graph: net.graph.clone(),
                system: sys.clone(),
                defs: net.defs.clone(),
            }));
        }
        Ok(out)
    }
}

fn subst_process(p: &Process, x: &Name, v: Val) -> Process {
    match p {
        Process::StateLeaf(s) => Process::leaf(s.subst(x, v)),
        Process::PChoice(l, q, r) => {
            Process::choice(subst_process(l, x, v), *q, subst_process(r, x, v))
        }
    }
}

/// Expands per-node alternative distributions into system-term
/// distributions: one result per combination of choices, each the product
/// of its per-node parts.
fn combine(names: &[Name], parts: &[Vec<SubDistribution<State>>]) -> Vec<SubDistribution<SystemTerm>> {
    let mut results = Vec::new();
    let mut picks = vec![0usize; parts.len()];
    loop {
        let mut acc: SubDistribution<Vec<State>> = SubDistribution::point(Vec::new());
        for (j, part) in parts.iter().enumerate() {
            acc = product_image(
                |prefix: &Vec<State>, s: &State| {
                    let mut next = prefix.clone();
                    next.push(s.clone());
                    next
                },
                &acc,
                &part[picks[j]],
            );
        }
        results.push(acc.map_image(|states| {
            SystemTerm::par_all(
                names
                    .iter()
                    .zip(states)
                    .map(|(n, s)| SystemTerm::Node(n.clone(), s.clone())),
            )
        }));
        // next combination (mixed radix)
        let mut j = parts.len();
        loop {
            if j == 0 {
                return results;
            }
            j -= 1;
            picks[j] += 1;
            if picks[j] < parts[j].len() {
                break;
            }
            picks[j] = 0;
        }
    }
}

/// Convenience wrappers over a throwaway engine.
pub fn state_steps(s: &State, defs: &DefEnv) -> Result<StepSet, SemanticsError> {
    StepEngine::new(defs).state_steps(s)
}

pub fn state_receives(
    s: &State,
    c: &Name,
    v: Val,
    defs: &DefEnv,
) -> Result<Vec<SubDistribution<State>>, SemanticsError> {
    StepEngine::new(defs).state_receives(s, c, v)
}

pub fn net_steps(
    net: &Network,
) -> Result<Vec<(NetAction, SubDistribution<SystemTerm>)>, SemanticsError> {
    StepEngine::new(&net.defs).net_steps(net)
}

pub fn net_input(
    net: &Network,
    from: &Name,
    c: &Name,
    v: Val,
) -> Result<Vec<SubDistribution<SystemTerm>>, SemanticsError> {
    StepEngine::new(&net.defs).net_input(net, from, c, v)
}

pub fn omega_pred(net: &Network) -> bool {
    StepEngine::new(&net.defs).omega_pred(net)
}

pub fn reduce(net: &Network) -> Result<Vec<SubDistribution<Network>>, SemanticsError> {
    StepEngine::new(&net.defs).reduce(net)
}

/// Canonical image of a system-term distribution, identifying congruent
/// targets.
pub fn canonical_image(d: &SubDistribution<SystemTerm>) -> SubDistribution<SystemTerm> {
    d.map_image(canonicalize)
}
