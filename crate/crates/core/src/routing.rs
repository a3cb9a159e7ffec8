//! Probabilistic routing case study.
//!
//! Two families of networks over the same interface: a one-node
//! *specification* that accepts `k` payloads on channel `c` and hands each
//! of them back to the environment in any order, and a distributed
//! *protocol* that receives the same payloads at an entry node and routes
//! them through a connectivity graph — choosing every next hop at random —
//! until they reach the single delivery node wired to the interface
//! output. [`check_equiv`] decides that the two are testing-equivalent by
//! running the divergence-free deadlock simulation in both directions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::checkers::{almost_sure_tau_reach, dfdsim_check, CheckerError, SimStats};
use crate::extensional::{build_plts, Alphabet, ExtAction, Plts};
use crate::syntax::{
    ConnGraph, DefEnv, Expr, Name, Network, Process, Ratio, State, SystemTerm, Val,
};

// ---------------------------------------------------------------------------
// multisets of payloads

/// A finite multiset of integer payloads.
///
/// Node buffers are bags: two copies of the same payload take two
/// deliveries, but the order in which copies arrived is forgotten. The
/// operations are functional so that a buffer can be threaded through the
/// builders without mutation.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct ValueMultiset {
    counts: BTreeMap<i64, usize>,
}

impl ValueMultiset {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_values(values: &[i64]) -> Self {
        let mut m = Self::default();
        for &v in values {
            *m.counts.entry(v).or_insert(0) += 1;
        }
        m
    }

    /// The bag with one more copy of `v`.
    pub fn add(&self, v: i64) -> Self {
        let mut m = self.clone();
        *m.counts.entry(v).or_insert(0) += 1;
        m
    }

    /// The bag with one copy of `v` removed, or `None` when `v` is absent.
    pub fn remove(&self, v: i64) -> Option<Self> {
        let mut m = self.clone();
        match m.counts.get_mut(&v) {
            None => None,
            Some(c) if *c == 1 => {
                m.counts.remove(&v);
                Some(m)
            }
            Some(c) => {
                *c -= 1;
                Some(m)
            }
        }
    }

    /// How many copies of `v` the bag holds.
    pub fn count(&self, v: i64) -> usize {
        self.counts.get(&v).copied().unwrap_or(0)
    }

    /// Total number of copies across all payloads.
    pub fn len(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Every copy, ascending, duplicates adjacent.
    pub fn values(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.len());
        for (&v, &c) in &self.counts {
            for _ in 0..c {
                out.push(v);
            }
        }
        out
    }

    /// The distinct payloads present.
    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.counts.keys().copied()
    }

    /// The bag holding every copy from both operands.
    pub fn union(&self, other: &Self) -> Self {
        let mut m = self.clone();
        for (&v, &c) in &other.counts {
            *m.counts.entry(v).or_insert(0) += c;
        }
        m
    }
}

// ---------------------------------------------------------------------------
// errors and configuration

/// Errors from the routing builders and the equivalence driver.
#[derive(Debug, Error)]
pub enum RoutingError {
    /// The configuration breaks the structural conditions the protocol
    /// relies on; every violation found is listed, not just the first.
    #[error("invalid topology: {}", .0.join("; "))]
    InvalidTopology(Vec<String>),
    #[error(transparent)]
    Checker(#[from] CheckerError),
}

/// Parameters of one routing instance.
///
/// The connectivity graph must use the vertices `i`, `o`, `n1`, …, `nj`
/// with `j >= 2`. Vertex `i` is the only interface input and feeds `n1`
/// alone; `o` is the only interface output and hears `n2` alone. Payloads
/// enter the system at `n1` and must be able to percolate to the delivery
/// node `n2`, so every internal node needs a directed internal path to
/// `n2` and nothing may route back into `n1` (that would also let `n1`
/// overhear deliveries, since it listens on the interface channel).
///
/// Every internal node except `n2` re-rolls its next hop after each step:
/// `hops[h]` gives positive weights over exactly the internal
/// out-neighbours of `nh`.
#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub graph: ConnGraph,
    /// Next-hop weights per internal node index (1-based, every index
    /// except 2).
    pub hops: BTreeMap<usize, Vec<(usize, u32)>>,
    /// How many payloads the environment will inject.
    pub k: usize,
    /// Their values, one per payload.
    pub values: Vec<i64>,
}

impl ProtocolConfig {
    /// A configuration with the default payloads `1..=k`.
    pub fn new(graph: ConnGraph, hops: BTreeMap<usize, Vec<(usize, u32)>>, k: usize) -> Self {
        let values = (1..=k as i64).collect();
        ProtocolConfig {
            graph,
            hops,
            k,
            values,
        }
    }

    /// Checks every structural condition, returning the number of internal
    /// nodes `j` on success and the full list of violations otherwise.
    pub fn validate(&self) -> Result<usize, RoutingError> {
        let mut bad: Vec<String> = Vec::new();

        let j = self.graph.vertices().count().saturating_sub(2);
        let mut expected: BTreeSet<Name> = BTreeSet::new();
        expected.insert(Name::new("i"));
        expected.insert(Name::new("o"));
        for h in 1..=j {
            expected.insert(internal_vertex(h));
        }
        let actual: BTreeSet<Name> = self.graph.vertices().cloned().collect();
        if j < 2 || actual != expected {
            bad.push(format!(
                "vertices must be exactly i, o, n1..nj with j >= 2 (found: {})",
                join_names(&actual)
            ));
            // The remaining conditions are meaningless over a malformed
            // vertex set.
            return Err(RoutingError::InvalidTopology(bad));
        }

        let vi = Name::new("i");
        let vo = Name::new("o");
        let singleton = |h: usize| -> BTreeSet<Name> {
            let mut s = BTreeSet::new();
            s.insert(internal_vertex(h));
            s
        };
        if self.graph.out_neighbors(&vi) != singleton(1) {
            bad.push("the input vertex i must feed exactly n1".into());
        }
        if !self.graph.in_neighbors(&vi).is_empty() {
            bad.push("no edges may point into the input vertex i".into());
        }
        if self.graph.in_neighbors(&vo) != singleton(2) {
            bad.push("the output vertex o must hear exactly n2".into());
        }
        if !self.graph.out_neighbors(&vo).is_empty() {
            bad.push("no edges may leave the output vertex o".into());
        }
        {
            let mut from_i = BTreeSet::new();
            from_i.insert(vi.clone());
            if self.graph.in_neighbors(&internal_vertex(1)) != from_i {
                bad.push("n1 must hear exactly the input vertex i".into());
            }
        }

        // Every internal node must have a directed internal path to the
        // delivery node n2 (backward closure from n2).
        let mut reached: BTreeSet<Name> = singleton(2);
        loop {
            let mut changed = false;
            for h in 1..=j {
                let v = internal_vertex(h);
                if !reached.contains(&v)
                    && self.graph.out_neighbors(&v).iter().any(|t| reached.contains(t))
                {
                    reached.insert(v);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for h in 1..=j {
            if !reached.contains(&internal_vertex(h)) {
                bad.push(format!("n{h} has no internal path to the delivery node n2"));
            }
        }

        // Hop weights: one row per internal node except n2, covering
        // exactly its internal out-neighbours with positive weights.
        for (&h, _) in &self.hops {
            if h == 2 || h == 0 || h > j {
                bad.push(format!("unexpected hop weights for index {h}"));
            }
        }
        for h in (1..=j).filter(|&h| h != 2) {
            let row = match self.hops.get(&h) {
                None => {
                    bad.push(format!("missing hop weights for n{h}"));
                    continue;
                }
                Some(row) => row,
            };
            let mut seen: BTreeSet<Name> = BTreeSet::new();
            for &(hp, w) in row {
                if w == 0 {
                    bad.push(format!("n{h} assigns weight zero to a next hop"));
                }
                if hp == 0 || hp > j {
                    bad.push(format!("n{h} names n{hp}, which is not an internal node"));
                    continue;
                }
                if hp == h {
                    bad.push(format!("n{h} lists itself as a next hop"));
                    continue;
                }
                if !seen.insert(internal_vertex(hp)) {
                    bad.push(format!("n{h} lists the next hop n{hp} twice"));
                }
            }
            let nbrs: BTreeSet<Name> = self
                .graph
                .out_neighbors(&internal_vertex(h))
                .into_iter()
                .filter(|v| *v != vi && *v != vo)
                .collect();
            if seen != nbrs {
                bad.push(format!(
                    "hop weights of n{h} must cover exactly its internal out-neighbours ({})",
                    join_names(&nbrs)
                ));
            }
        }

        if self.values.len() != self.k {
            bad.push(format!(
                "expected {} payload values, found {}",
                self.k,
                self.values.len()
            ));
        }

        if bad.is_empty() {
            Ok(j)
        } else {
            Err(RoutingError::InvalidTopology(bad))
        }
    }
}

fn internal_vertex(h: usize) -> Name {
    Name::new(&format!("n{h}"))
}

fn internal_channel(h: usize) -> String {
    format!("c{h}")
}

fn join_names(set: &BTreeSet<Name>) -> String {
    let mut s = String::new();
    for (i, n) in set.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        s.push_str(n.as_str());
    }
    s
}

// ---------------------------------------------------------------------------
// the specification

/// The specification network: one node `m` between interface vertices `i`
/// and `o`, still owing the environment `kp` receptions while buffering
/// the bag `a`. It accepts any payload on `c` and offers every buffered
/// payload back on `c`, in any order, until both are exhausted.
pub fn build_spec(kp: usize, a: &ValueMultiset) -> Network {
    let mut defs = DefEnv::new();
    for k in 0..=kp {
        // After `kp - k` receptions at most `a.len() + (kp - k)` copies
        // can be buffered.
        for sz in 0..=(a.len() + (kp - k)) {
            let (ps, body) = spec_def_body(k, sz);
            defs.insert(spec_def_name(k, sz), ps, body);
        }
    }
    let init = State::Call(
        spec_def_name(kp, a.len()),
        a.values().into_iter().map(Expr::Int).collect(),
    );
    let mut graph = ConnGraph::new();
    graph.add_edge(Name::new("i"), Name::new("m"));
    graph.add_edge(Name::new("m"), Name::new("o"));
    Network::new(graph, SystemTerm::node("m", init), defs)
}

fn spec_def_name(kp: usize, sz: usize) -> Name {
    Name::new(&format!("P{kp}_{sz}"))
}

/// Formal parameter list `x1..xsz` holding a buffer of size `sz`.
fn buffer_params(sz: usize) -> Vec<Name> {
    (1..=sz).map(|i| Name::new(&format!("x{i}"))).collect()
}

fn param_vars(ps: &[Name]) -> Vec<Expr> {
    ps.iter().cloned().map(Expr::Var).collect()
}

fn param_vars_plus_input(ps: &[Name]) -> Vec<Expr> {
    let mut args = param_vars(ps);
    args.push(Expr::Var(Name::new("y")));
    args
}

fn drop_param(ps: &[Name], idx: usize) -> Vec<Expr> {
    ps.iter()
        .enumerate()
        .filter(|&(i, _)| i != idx)
        .map(|(_, p)| Expr::Var(p.clone()))
        .collect()
}

fn spec_def_body(kp: usize, sz: usize) -> (Vec<Name>, State) {
    let ps = buffer_params(sz);
    // One offer per buffered copy, presented in parameter order, then the
    // reception (while any remain).
    let outputs = (0..sz)
        .map(|idx| {
            State::broadcast(
                "c",
                Expr::Var(ps[idx].clone()),
                Process::leaf(State::Call(spec_def_name(kp, sz - 1), drop_param(&ps, idx))),
            )
        })
        .reduce(State::sum);
    let input = (kp > 0).then(|| {
        State::receive(
            "c",
            "y",
            Process::leaf(State::Call(
                spec_def_name(kp - 1, sz + 1),
                param_vars_plus_input(&ps),
            )),
        )
    });
    let body = match (outputs, input) {
        (Some(out), Some(inp)) => State::sum(out, inp),
        (Some(out), None) => out,
        (None, Some(inp)) => inp,
        (None, None) => State::Nil,
    };
    (ps, body)
}

// ---------------------------------------------------------------------------
// the protocol

/// Builds the distributed implementation for a validated configuration:
/// the entry node `n1`, the delivery node `n2`, and relays `n3..nj`, each
/// buffering payloads and re-rolling its next hop after every step.
pub fn build_protocol(cfg: &ProtocolConfig) -> Result<Network, RoutingError> {
    let j = cfg.validate()?;
    let k = cfg.k;
    let mut defs = DefEnv::new();

    // Entry node n1: counts the receptions still owed, buffers copies in
    // transit, one definition per committed next hop.
    let lambda1 = &cfg.hops[&1];
    for kp in 0..=k {
        for sz in 0..=(k - kp) {
            for &(hp, _) in lambda1 {
                let ps = buffer_params(sz);
                let mut branches: Vec<State> = Vec::new();
                if kp > 0 {
                    let args = param_vars_plus_input(&ps);
                    branches.push(State::receive(
                        "c",
                        "y",
                        hop_choice(lambda1, |h2| {
                            State::Call(entry_name(kp - 1, sz + 1, h2), args.clone())
                        }),
                    ));
                }
                for idx in 0..sz {
                    let rest = drop_param(&ps, idx);
                    branches.push(State::broadcast(
                        &internal_channel(hp),
                        Expr::Var(ps[idx].clone()),
                        hop_choice(lambda1, |h2| {
                            State::Call(entry_name(kp, sz - 1, h2), rest.clone())
                        }),
                    ));
                }
                let body = branches.into_iter().reduce(State::sum).unwrap_or(State::Nil);
                defs.insert(entry_name(kp, sz, hp), ps, body);
            }
        }
    }

    // Delivery node n2: accepts payloads on its private channel and
    // broadcasts buffered ones on the interface channel, which only the
    // output vertex can hear. At sz = k the reception continues into the
    // undefined name R{k+1}; a (k+1)-th copy cannot exist, and leaving the
    // name unbound means a bug would surface as an error rather than be
    // absorbed silently.
    for sz in 0..=k {
        let ps = buffer_params(sz);
        let mut branches = vec![State::receive(
            &internal_channel(2),
            "y",
            Process::leaf(State::Call(delivery_name(sz + 1), param_vars_plus_input(&ps))),
        )];
        for idx in 0..sz {
            branches.push(State::broadcast(
                "c",
                Expr::Var(ps[idx].clone()),
                Process::leaf(State::Call(delivery_name(sz - 1), drop_param(&ps, idx))),
            ));
        }
        let body = branches.into_iter().reduce(State::sum).unwrap_or(State::Nil);
        defs.insert(delivery_name(sz), ps, body);
    }

    // Relays n3..nj: accept on their private channel, forward on the
    // committed hop's channel, re-rolling the hop after every step.
    for h in 3..=j {
        let lam = &cfg.hops[&h];
        for sz in 0..=k {
            for &(hp, _) in lam {
                let ps = buffer_params(sz);
                let args = param_vars_plus_input(&ps);
                let mut branches = vec![State::receive(
                    &internal_channel(h),
                    "y",
                    hop_choice(lam, |h2| State::Call(relay_name(h, h2, sz + 1), args.clone())),
                )];
                for idx in 0..sz {
                    let rest = drop_param(&ps, idx);
                    branches.push(State::broadcast(
                        &internal_channel(hp),
                        Expr::Var(ps[idx].clone()),
                        hop_choice(lam, |h2| State::Call(relay_name(h, h2, sz - 1), rest.clone())),
                    ));
                }
                let body = branches.into_iter().reduce(State::sum).unwrap_or(State::Nil);
                defs.insert(relay_name(h, hp, sz), ps, body);
            }
        }
    }

    // Initial system: every buffer empty. With nothing buffered the
    // committed-hop variants have identical bodies, so the least index is
    // a canonical representative.
    let mut nodes = vec![
        SystemTerm::node("n1", State::Call(entry_name(k, 0, min_hop(lambda1)), vec![])),
        SystemTerm::node("n2", State::Call(delivery_name(0), vec![])),
    ];
    for h in 3..=j {
        let lam = &cfg.hops[&h];
        nodes.push(SystemTerm::node(
            &format!("n{h}"),
            State::Call(relay_name(h, min_hop(lam), 0), vec![]),
        ));
    }
    let system = nodes.into_iter().reduce(SystemTerm::par).expect("j >= 2");
    Ok(Network::new(cfg.graph.clone(), system, defs))
}

fn entry_name(kp: usize, sz: usize, hp: usize) -> Name {
    Name::new(&format!("Q{kp}_{sz}_{hp}"))
}

fn delivery_name(sz: usize) -> Name {
    Name::new(&format!("R{sz}"))
}

fn relay_name(h: usize, hp: usize, sz: usize) -> Name {
    Name::new(&format!("S{h}_{hp}_{sz}"))
}

fn min_hop(lambda: &[(usize, u32)]) -> usize {
    lambda.iter().map(|&(h, _)| h).min().expect("validated non-empty row")
}

/// The probabilistic next-hop choice: one branch per weighted neighbour,
/// committing the node to that outgoing channel until the choice is
/// re-rolled.
fn hop_choice(lambda: &[(usize, u32)], mk: impl Fn(usize) -> State) -> Process {
    let branches: Vec<(State, u64)> = lambda.iter().map(|&(hp, w)| (mk(hp), w as u64)).collect();
    let total: u64 = branches.iter().map(|(_, w)| *w).sum();
    weighted_choice(&branches, total)
}

fn weighted_choice(branches: &[(State, u64)], total: u64) -> Process {
    let (s0, w0) = &branches[0];
    if branches.len() == 1 {
        Process::leaf(s0.clone())
    } else {
        Process::choice(
            Process::leaf(s0.clone()),
            Ratio::new(*w0, total),
            weighted_choice(&branches[1..], total - w0),
        )
    }
}

// ---------------------------------------------------------------------------
// equivalence

/// The input vocabulary for comparing a routing instance against its
/// specification: the configured payloads, injected on channel `c` at the
/// input vertex `i`.
///
/// The private hop channels are omitted deliberately: only `n1` can hear
/// the environment, it listens on `c` alone, and so does the
/// specification node — injections on other channels produce identical
/// self-loops on both sides and decide nothing.
pub fn routing_alphabet(cfg: &ProtocolConfig) -> Alphabet {
    let mut values = BTreeMap::new();
    values.insert(
        Name::new("i"),
        cfg.values.iter().map(|&v| Val::Int(v)).collect::<BTreeSet<_>>(),
    );
    let mut channels = BTreeSet::new();
    channels.insert(Name::new("c"));
    Alphabet { values, channels }
}

/// Outcome of [`check_equiv`].
#[derive(Clone, Debug)]
pub struct RoutingReport {
    /// Both simulation directions hold, so the instance and its
    /// specification are testing-equivalent.
    pub equivalent: bool,
    pub spec_states: usize,
    pub protocol_states: usize,
    /// The protocol answers every specification challenge.
    pub forward_holds: bool,
    /// The specification answers every protocol challenge.
    pub backward_holds: bool,
    /// Pairs retained by the verified forward relation, when it exists.
    pub forward_witness: Option<usize>,
    pub backward_witness: Option<usize>,
    pub forward: SimStats,
    pub backward: SimStats,
}

/// Builds the specification and the protocol for `cfg` and decides their
/// equivalence by running the divergence-free deadlock simulation in both
/// directions under the payload alphabet.
pub fn check_equiv(cfg: &ProtocolConfig, bound: usize) -> Result<RoutingReport, RoutingError> {
    let protocol = build_protocol(cfg)?;
    let spec = build_spec(cfg.k, &ValueMultiset::empty());
    let alphabet = routing_alphabet(cfg);

    let sp = build_plts(&[spec.clone()], &alphabet, bound).map_err(CheckerError::from)?;
    let pp = build_plts(&[protocol.clone()], &alphabet, bound).map_err(CheckerError::from)?;
    if !sp.is_convergent() || !pp.is_convergent() {
        return Err(RoutingError::Checker(CheckerError::NotConvergent));
    }

    let fwd = dfdsim_check(&spec, &protocol, &alphabet, bound)?;
    let bwd = dfdsim_check(&protocol, &spec, &alphabet, bound)?;
    Ok(RoutingReport {
        equivalent: fwd.relation.is_some() && bwd.relation.is_some(),
        spec_states: sp.len(),
        protocol_states: pp.len(),
        forward_holds: fwd.relation.is_some(),
        backward_holds: bwd.relation.is_some(),
        forward_witness: fwd.relation.as_ref().map(|r| r.pairs.len()),
        backward_witness: bwd.relation.as_ref().map(|r| r.pairs.len()),
        forward: fwd.stats,
        backward: bwd.stats,
    })
}

// ---------------------------------------------------------------------------
// reading protocol states back

/// A protocol state read back from its system term: the receptions still
/// owed at the entry node and every node's buffer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolSnapshot {
    pub counter: usize,
    /// Buffer per internal node index.
    pub buffers: BTreeMap<usize, ValueMultiset>,
}

impl ProtocolSnapshot {
    /// Every buffered copy in one bag.
    pub fn bag(&self) -> ValueMultiset {
        self.buffers
            .values()
            .fold(ValueMultiset::empty(), |acc, b| acc.union(b))
    }

    /// True when every buffered copy sits at the delivery node.
    pub fn all_delivered(&self) -> bool {
        self.buffers.iter().all(|(&h, b)| h == 2 || b.is_empty())
    }
}

/// Decodes a system term produced by [`build_protocol`]; `None` when the
/// term is not in the shape the builder emits.
pub fn decode_protocol_state(sys: &SystemTerm) -> Option<ProtocolSnapshot> {
    let mut counter = None;
    let mut buffers = BTreeMap::new();
    for (node, state) in sys.components() {
        let h = parse_usize(node.as_str().strip_prefix('n')?)?;
        let (name, args) = match state {
            State::Call(name, args) => (name, args),
            _ => return None,
        };
        let vals = decode_args(&args)?;
        let n = name.as_str();
        if let Some(rest) = n.strip_prefix('Q') {
            let nums = parse_fields(rest)?;
            if nums.len() != 3 || h != 1 || nums[1] != vals.len() {
                return None;
            }
            counter = Some(nums[0]);
            buffers.insert(1, ValueMultiset::from_values(&vals));
        } else if let Some(rest) = n.strip_prefix('R') {
            let nums = parse_fields(rest)?;
            if nums.len() != 1 || h != 2 || nums[0] != vals.len() {
                return None;
            }
            buffers.insert(2, ValueMultiset::from_values(&vals));
        } else if let Some(rest) = n.strip_prefix('S') {
            let nums = parse_fields(rest)?;
            if nums.len() != 3 || nums[0] != h || nums[2] != vals.len() {
                return None;
            }
            buffers.insert(h, ValueMultiset::from_values(&vals));
        } else {
            return None;
        }
    }
    Some(ProtocolSnapshot {
        counter: counter?,
        buffers,
    })
}

fn parse_usize(s: &str) -> Option<usize> {
    s.parse().ok()
}

fn parse_fields(s: &str) -> Option<Vec<usize>> {
    s.split('_').map(parse_usize).collect()
}

fn decode_args(args: &[Expr]) -> Option<Vec<i64>> {
    args.iter()
        .map(|e| {
            if !e.is_closed() {
                return None;
            }
            match e.eval() {
                Val::Int(i) => Some(i),
                Val::Bool(_) => None,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// invariants

/// Sweeps every state of a protocol transition system built over the
/// payload alphabet and checks the behavioural contract:
///
/// - every state decodes to a reception counter and per-node buffers, and
///   counter plus buffered copies never exceeds `k`;
/// - a state is silent (no internal step) exactly when every buffered
///   copy sits at the delivery node;
/// - internal steps preserve the counter and the bag of buffered copies;
/// - while receptions remain, an injected payload lands in the entry
///   node's buffer and decrements the counter; afterwards injections
///   self-loop;
/// - outputs carry exactly one delivery-node payload to the interface and
///   remove it, leaving everything else in place;
/// - from every state, some resolution of the internal choices delivers
///   every copy with probability one.
///
/// Returns the full list of violations, so a green run certifies the
/// whole reachable space.
pub fn protocol_invariants(plts: &Plts, k: usize) -> Result<(), Vec<String>> {
    let mut bad: Vec<String> = Vec::new();
    let snaps: Vec<Option<ProtocolSnapshot>> = (0..plts.len())
        .map(|s| decode_protocol_state(plts.system(s)))
        .collect();
    for (s, snap) in snaps.iter().enumerate() {
        if snap.is_none() {
            bad.push(format!("state {s} does not decode to a protocol shape"));
        }
        let Some(sn) = snap else { continue };

        let total: usize = sn.buffers.values().map(|b| b.len()).sum();
        if sn.counter + total > k {
            bad.push(format!(
                "state {s}: counter {} plus {} buffered copies exceeds {k}",
                sn.counter, total
            ));
        }
        let bag = sn.bag();

        let mut has_tau = false;
        for (act, dist) in plts.transitions(s) {
            match act {
                ExtAction::Tau => {
                    has_tau = true;
                    for (&t, _) in dist.iter() {
                        let Some(tn) = &snaps[t] else { continue };
                        if tn.counter != sn.counter || tn.bag() != bag {
                            bad.push(format!(
                                "state {s}: internal step to {t} changes the counter or the bag"
                            ));
                        }
                    }
                }
                ExtAction::In(src, ch, val) => {
                    if src.as_str() != "i" || ch.as_str() != "c" {
                        bad.push(format!("state {s}: unexpected input action"));
                        continue;
                    }
                    let Val::Int(v) = val else {
                        bad.push(format!("state {s}: non-integer input payload"));
                        continue;
                    };
                    if sn.counter == 0 {
                        let selfloop = dist.iter().all(|(&t, _)| t == s)
                            && (dist.mass() - 1.0).abs() < 1e-9;
                        if !selfloop {
                            bad.push(format!(
                                "state {s}: input after the last reception is not a self-loop"
                            ));
                        }
                    } else {
                        let mut expected = sn.buffers.clone();
                        expected.insert(1, sn.buffers[&1].add(*v));
                        for (&t, _) in dist.iter() {
                            let Some(tn) = &snaps[t] else { continue };
                            if tn.counter != sn.counter - 1 || tn.buffers != expected {
                                bad.push(format!(
                                    "state {s}: input does not buffer the payload at n1"
                                ));
                            }
                        }
                    }
                }
                ExtAction::Out(ch, val, eta) => {
                    let eta_ok = eta.len() == 1 && eta.iter().next().map(Name::as_str) == Some("o");
                    if ch.as_str() != "c" || !eta_ok {
                        bad.push(format!("state {s}: unexpected output action"));
                        continue;
                    }
                    let Val::Int(v) = val else {
                        bad.push(format!("state {s}: non-integer output payload"));
                        continue;
                    };
                    let Some(left) = sn.buffers[&2].remove(*v) else {
                        bad.push(format!(
                            "state {s}: outputs {v}, which the delivery node does not hold"
                        ));
                        continue;
                    };
                    let mut expected = sn.buffers.clone();
                    expected.insert(2, left);
                    for (&t, _) in dist.iter() {
                        let Some(tn) = &snaps[t] else { continue };
                        if tn.counter != sn.counter || tn.buffers != expected {
                            bad.push(format!(
                                "state {s}: output does not remove exactly one copy at n2"
                            ));
                        }
                    }
                }
            }
        }

        if has_tau == sn.all_delivered() {
            bad.push(format!(
                "state {s}: internal activity and delivery status disagree (tau: {has_tau})"
            ));
        }
    }

    // Delivery guarantee: from everywhere, the silent states — everything
    // buffered at n2 — are reachable with probability one via internal
    // steps alone.
    let target: Vec<bool> = snaps
        .iter()
        .map(|sn| sn.as_ref().is_some_and(ProtocolSnapshot::all_delivered))
        .collect();
    let reach = almost_sure_tau_reach(plts, &target);
    for (s, ok) in reach.iter().enumerate() {
        if !ok {
            bad.push(format!(
                "state {s} cannot deliver all copies with probability one"
            ));
        }
    }

    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}

// ---------------------------------------------------------------------------
