//! Simulation checkers: the weak-matching engine (deciding whether a state
//! can weakly perform an action into a distribution related to a challenge
//! target), the simulation preorder via simple simulations, the
//! divergence-free deadlock simulation, and verification of candidate
//! deadlock-simulation relations.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::extensional::{build_plts, Alphabet, ExtAction, ExtError, Plts};
use crate::intensional::SemanticsError;
use crate::lp::solve_eq_nonneg;
use crate::prob::SubDistribution;
use crate::syntax::{canonicalize, interface, well_formed, Name, Network, Val};

/// Weak output moves search over ordered block decompositions of the target
/// set via a bit mask; wider target sets are rejected as infeasible.
pub const MAX_ETA: usize = 8;

const LP_TOL: f64 = 1e-9;
const WITNESS_TOL: f64 = 1e-7;

/// Errors raised by the checkers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckerError {
    #[error("the networks have different interfaces")]
    InterfaceMismatch,
    #[error("a network is not convergent")]
    NotConvergent,
    #[error("state space exceeded the configured bound of {bound} states")]
    StateSpaceExceeded { bound: usize },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

impl From<ExtError> for CheckerError {
    fn from(e: ExtError) -> Self {
        match e {
            ExtError::StateSpaceExceeded { bound } => CheckerError::StateSpaceExceeded { bound },
            ExtError::Semantics(s) => CheckerError::Semantics(s),
        }
    }
}

/// A strong transition a simulation candidate must answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Challenge {
    pub source: usize,
    pub action: ExtAction,
    pub target: SubDistribution<usize>,
}

/// All strong challenges of a state.
pub fn challenges(p: &Plts, s: usize) -> Vec<Challenge> {
    p.transitions(s)
        .iter()
        .map(|(a, d)| Challenge {
            source: s,
            action: a.clone(),
            target: d.clone(),
        })
        .collect()
}

/// Which co-inductive relation a checker established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimKind {
    Simulation,
    DivergenceFreeDeadlock,
}

/// A verified relation over the states of a joint transition system.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRelation {
    pub pairs: BTreeSet<(usize, usize)>,
    pub kind: SimKind,
}

/// Work counters of a checker run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimStats {
    /// Interface-compatible pairs passing the per-state clause filters.
    pub initial_pairs: usize,
    /// Pairs surviving the boolean support-graph prefilter.
    pub prefilter_pairs: usize,
    /// Pairs in the final relation (0 when the roots are unrelated).
    pub final_pairs: usize,
    /// Weak-match feasibility problems solved.
    pub lp_calls: usize,
}

/// Outcome of a simulation check: the explored transition system, the root
/// state of each network in it, and the relation if the roots are related.
#[derive(Debug, Clone)]
pub struct SimCheck {
    pub plts: Plts,
    pub left_root: usize,
    pub right_root: usize,
    pub relation: Option<SimRelation>,
    pub stats: SimStats,
}

// ---------------------------------------------------------------------------
// small fixed-size bit sets over state indices

#[derive(Debug, Clone, PartialEq, Eq)]
struct Bits {
    words: Vec<u64>,
}

impl Bits {
    fn new(n: usize) -> Self {
        Bits {
            words: vec![0; (n + 63) / 64],
        }
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn clear(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn intersects(&self, other: &Bits) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .any(|(a, b)| a & b != 0)
    }
}

// ---------------------------------------------------------------------------
// almost-sure reachability in the internal fragment

/// States from which some resolution reaches the target set with
/// probability one using only internal transitions. Exposed for clients
/// that need to audit "the system can always wind down to here" claims,
/// such as the routing case study's delivery guarantee.
pub fn almost_sure_tau_reach(p: &Plts, target: &[bool]) -> Vec<bool> {
    as_reach_tau(p, target)
}

/// States from which some resolution reaches the target set with
/// probability one using only internal transitions (a greatest fixpoint
/// over a least fixpoint, the classic qualitative-reachability recursion).
fn as_reach_tau(p: &Plts, target: &[bool]) -> Vec<bool> {
    let n = p.len();
    let mut a: Vec<bool> = vec![true; n];
    loop {
        let mut r: Vec<bool> = target.to_vec();
        loop {
            let mut changed = false;
            for s in 0..n {
                if r[s] || !a[s] {
                    continue;
                }
                let ok = p.transitions(s).iter().any(|(act, d)| {
                    *act == ExtAction::Tau
                        && d.support().all(|&t| a[t])
                        && d.support().any(|&t| r[t])
                });
                if ok {
                    r[s] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if r == a {
            return a;
        }
        a = r;
    }
}

// ---------------------------------------------------------------------------
// the product graph of a weak action

/// A node of the weak-action product graph: a state together with the part
/// of the output target set not yet served (or a pending bit for inputs).
type PNode = (usize, u16);

struct PEdge {
    from: usize,
    /// Target product nodes with probabilities (a full distribution).
    targets: Vec<(usize, f64)>,
}

struct PGraph {
    nodes: Vec<PNode>,
    index: BTreeMap<PNode, usize>,
    edges: Vec<PEdge>,
    out_edges: Vec<Vec<usize>>,
    full_mask: u16,
}

/// The mask discipline of an action: outputs serve blocks of the target
/// set, inputs flip a single pending bit, internal moves carry no mask.
enum MaskKind {
    None,
    Input,
    Output {
        channel: Name,
        value: Val,
        eta: Vec<Name>,
    },
}

fn mask_kind(action: &ExtAction) -> Option<(MaskKind, u16)> {
    match action {
        ExtAction::Tau => Some((MaskKind::None, 0)),
        ExtAction::In(..) => Some((MaskKind::Input, 1)),
        ExtAction::Out(c, v, eta) => {
            if eta.len() > MAX_ETA {
                return None;
            }
            let eta: Vec<Name> = eta.iter().cloned().collect();
            let full = (1u16 << eta.len()) - 1;
            Some((
                MaskKind::Output {
                    channel: c.clone(),
                    value: *v,
                    eta,
                },
                full,
            ))
        }
    }
}

fn intern_pnode(g: &mut PGraph, queue: &mut VecDeque<usize>, node: PNode) -> usize {
    if let Some(&i) = g.index.get(&node) {
        return i;
    }
    let i = g.nodes.len();
    g.nodes.push(node);
    g.index.insert(node, i);
    g.out_edges.push(Vec::new());
    queue.push_back(i);
    i
}

/// Explores the product graph forward from the given states (each entered
/// with the full mask). Internal transitions preserve the mask; a strong
/// output usable for the action clears the block of targets it serves; the
/// matching input clears the pending bit. Mask zero means the weak move may
/// finish at this state.
fn product_forward(p: &Plts, inits: &[usize], action: &ExtAction) -> Option<PGraph> {
    let (kind, full) = mask_kind(action)?;
    let mut g = PGraph {
        nodes: Vec::new(),
        index: BTreeMap::new(),
        edges: Vec::new(),
        out_edges: Vec::new(),
        full_mask: full,
    };
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in inits {
        intern_pnode(&mut g, &mut queue, (s, full));
    }
    while let Some(ni) = queue.pop_front() {
        let (s, mask) = g.nodes[ni];
        for (act, dist) in p.transitions(s) {
            let next_mask = match (act, &kind) {
                (ExtAction::Tau, _) => Some(mask),
                (ExtAction::In(..), MaskKind::Input) if mask == 1 && act == action => Some(0),
                (
                    ExtAction::Out(c2, v2, eta2),
                    MaskKind::Output {
                        channel,
                        value,
                        eta,
                    },
                ) => {
                    if c2 != channel || v2 != value {
                        None
                    } else {
                        let mut block = 0u16;
                        let mut inside = true;
                        for x in eta2 {
                            match eta.iter().position(|y| y == x) {
                                Some(b) => block |= 1 << b,
                                None => inside = false,
                            }
                        }
                        // usable only when the strong target set is a block
                        // of the part still to serve
                        if inside && block & !mask == 0 {
                            Some(mask & !block)
                        } else {
                            None
                        }
                    }
                }
                _ => None,
            };
            let Some(next_mask) = next_mask else { continue };
            let targets: Vec<(usize, f64)> = dist
                .iter()
                .map(|(&t, pr)| (intern_pnode(&mut g, &mut queue, (t, next_mask)), pr))
                .collect();
            g.edges.push(PEdge { from: ni, targets });
            let eid = g.edges.len() - 1;
            g.out_edges[ni].push(eid);
        }
    }
    Some(g)
}

/// Product nodes from which some resolution delivers all mass to absorbing
/// nodes (again a greatest fixpoint over a least fixpoint). Mass may cycle
/// arbitrarily long as long as it drains with probability one, so plain
/// backward reachability would be too weak a filter and insisting that
/// every branch of every step drains in finitely many steps would wrongly
/// reject looping moves.
fn product_as_reach(g: &PGraph, absorber: &[bool]) -> Vec<bool> {
    let n = g.nodes.len();
    let mut a: Vec<bool> = vec![true; n];
    loop {
        let mut r: Vec<bool> = absorber.to_vec();
        loop {
            let mut changed = false;
            for e in &g.edges {
                if r[e.from] || !a[e.from] {
                    continue;
                }
                if e.targets.iter().all(|&(t, _)| a[t]) && e.targets.iter().any(|&(t, _)| r[t]) {
                    r[e.from] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if r == a {
            return a;
        }
        a = r;
    }
}

/// The states a single state can end in after weakly performing the action
/// (ignoring probabilities): a sound over-approximation of the supports of
/// its weak derivatives, used to prune simulation candidates cheaply.
fn weak_reach(p: &Plts, s: usize, action: &ExtAction) -> Bits {
    let mut bits = Bits::new(p.len());
    let Some(g) = product_forward(p, &[s], action) else {
        return bits;
    };
    for &(state, mask) in &g.nodes {
        if mask == 0 {
            bits.set(state);
        }
    }
    bits
}

// ---------------------------------------------------------------------------
// weak-match feasibility

/// How the stopped distribution of a weak move must relate to a challenge.
enum Coupling<'a> {
    /// Equal-mass coupling against state partners: the challenge target
    /// must decompose over related pairs (the lifting of a state relation),
    /// which forces the weak move to deliver full mass.
    Elements {
        target: &'a SubDistribution<usize>,
        partners: &'a BTreeMap<usize, Vec<usize>>,
    },
    /// Sub-distribution lifting against candidate rows (state paired with a
    /// distribution): mass may be lost to divergence, empty rows are legal.
    Rows {
        target: &'a SubDistribution<usize>,
        rows: &'a BTreeMap<usize, Vec<SubDistribution<usize>>>,
    },
    /// No challenge: any split of the mass may stop, but only inside the
    /// allowed set (deadlock matching).
    StopWithin { allowed: &'a BTreeSet<usize> },
}

/// Decides whether `init` weakly performs `action` into some distribution
/// compatible with the coupling requirement, by linear feasibility over
/// edge-occupation variables of the product graph. Flow balance at every
/// node routes the initial mass through strong transitions into stopped
/// mass (and, where the coupling permits, divergence). Returns the relation
/// pairs a witness coupling placed mass on (empty for non-element
/// couplings), or `None` when no weak move fits.
fn weak_feasible(
    p: &Plts,
    diverging: &BTreeSet<usize>,
    init: &SubDistribution<usize>,
    action: &ExtAction,
    coupling: &Coupling<'_>,
) -> Option<Vec<(usize, usize)>> {
    let init_states: Vec<usize> = init.support().copied().collect();
    let graph = product_forward(p, &init_states, action)?;
    let full_mask = graph.full_mask;

    // element couplings force mass conservation, so divergence slack would
    // never carry weight there
    let mass_preserving = matches!(coupling, Coupling::Elements { .. });

    let allowed_stop: BTreeSet<usize> = match coupling {
        Coupling::Elements { target, partners } => {
            let mut acc = BTreeSet::new();
            for u in target.support() {
                let ps = partners.get(u)?;
                if ps.is_empty() {
                    return None;
                }
                acc.extend(ps.iter().copied());
            }
            acc
        }
        Coupling::Rows { target, rows } => {
            let mut acc = BTreeSet::new();
            for u in target.support() {
                let rs = rows.get(u)?;
                if rs.is_empty() {
                    return None;
                }
                for r in rs {
                    acc.extend(r.support().copied());
                }
            }
            acc
        }
        Coupling::StopWithin { allowed } => (*allowed).clone(),
    };

    // slice the graph down to nodes that can drain: mass must end in a stop
    // or divergence absorber almost surely
    let n_nodes = graph.nodes.len();
    let mut absorber = vec![false; n_nodes];
    for (i, &(s, mask)) in graph.nodes.iter().enumerate() {
        let can_stop = mask == 0 && allowed_stop.contains(&s);
        let can_diverge = !mass_preserving && diverging.contains(&s);
        if can_stop || can_diverge {
            absorber[i] = true;
        }
    }
    let usable = product_as_reach(&graph, &absorber);
    for &s in &init_states {
        if !usable[graph.index[&(s, full_mask)]] {
            return None;
        }
    }

    // forward restriction along edges staying inside the usable slice
    let mut live = vec![false; n_nodes];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in &init_states {
        let i = graph.index[&(s, full_mask)];
        if !live[i] {
            live[i] = true;
            queue.push_back(i);
        }
    }
    let mut live_edges: Vec<usize> = Vec::new();
    while let Some(i) = queue.pop_front() {
        for &eid in &graph.out_edges[i] {
            let e = &graph.edges[eid];
            if !e.targets.iter().all(|&(t, _)| usable[t]) {
                continue;
            }
            live_edges.push(eid);
            for &(t, _) in &e.targets {
                if !live[t] {
                    live[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }

    // variable layout: one occupation per live edge, then divergence slack,
    // stop mass, and coupling weights
    let mut nvars = 0;
    let mut edge_var: BTreeMap<usize, usize> = BTreeMap::new();
    for &eid in &live_edges {
        edge_var.insert(eid, nvars);
        nvars += 1;
    }
    let mut div_var: BTreeMap<usize, usize> = BTreeMap::new();
    if !mass_preserving {
        for (i, &(s, _)) in graph.nodes.iter().enumerate() {
            if live[i] && diverging.contains(&s) {
                div_var.insert(i, nvars);
                nvars += 1;
            }
        }
    }
    let mut stop_var: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, &(s, mask)) in graph.nodes.iter().enumerate() {
        if live[i] && mask == 0 && allowed_stop.contains(&s) {
            stop_var.insert(i, nvars);
            nvars += 1;
        }
    }
    let mut w_elem: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut w_row: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    match coupling {
        Coupling::Elements { target, partners } => {
            for u in target.support() {
                for &v in &partners[u] {
                    // partners the weak move cannot finish at carry no mass
                    if graph
                        .index
                        .get(&(v, 0))
                        .map(|i| stop_var.contains_key(i))
                        .unwrap_or(false)
                    {
                        w_elem.insert((*u, v), nvars);
                        nvars += 1;
                    }
                }
                if !w_elem.keys().any(|&(a, _)| a == *u) {
                    return None;
                }
            }
        }
        Coupling::Rows { target, rows } => {
            for u in target.support() {
                for (ri, _) in rows[u].iter().enumerate() {
                    w_row.insert((*u, ri), nvars);
                    nvars += 1;
                }
            }
        }
        Coupling::StopWithin { .. } => {}
    }

    // equality constraints: one flow-balance row per live node, then the
    // coupling obligations
    let mut rows_a: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let node_row: BTreeMap<usize, usize> = (0..n_nodes)
        .filter(|&i| live[i])
        .enumerate()
        .map(|(row, i)| (i, row))
        .collect();
    for _ in 0..node_row.len() {
        rows_a.push(vec![0.0; nvars]);
        rhs.push(0.0);
    }
    for (&i, &row) in &node_row {
        let (s, mask) = graph.nodes[i];
        if mask == full_mask {
            rhs[row] = init.weight(&s);
        }
        if let Some(&v) = div_var.get(&i) {
            rows_a[row][v] = 1.0;
        }
        if let Some(&v) = stop_var.get(&i) {
            rows_a[row][v] = 1.0;
        }
    }
    for &eid in &live_edges {
        let e = &graph.edges[eid];
        let v = edge_var[&eid];
        rows_a[node_row[&e.from]][v] += 1.0;
        for &(t, pr) in &e.targets {
            rows_a[node_row[&t]][v] -= pr;
        }
    }
    match coupling {
        Coupling::Elements { target, partners: _ } => {
            // each challenge state distributes its mass over its pairs
            for (u, m) in target.iter() {
                let mut row = vec![0.0; nvars];
                for (&(a, _), &v) in &w_elem {
                    if a == *u {
                        row[v] = 1.0;
                    }
                }
                rows_a.push(row);
                rhs.push(m);
            }
            // the stop mass at a state is exactly the mass coupled onto it
            for (&i, &sv) in &stop_var {
                let (s, _) = graph.nodes[i];
                let mut row = vec![0.0; nvars];
                row[sv] = 1.0;
                for (&(_, b), &v) in &w_elem {
                    if b == s {
                        row[v] -= 1.0;
                    }
                }
                rows_a.push(row);
                rhs.push(0.0);
            }
        }
        Coupling::Rows { target, rows } => {
            // each challenge state distributes its mass over its rows
            for (u, m) in target.iter() {
                let mut row = vec![0.0; nvars];
                for (&(a, _), &v) in &w_row {
                    if a == *u {
                        row[v] = 1.0;
                    }
                }
                rows_a.push(row);
                rhs.push(m);
            }
            // stop mass per state equals the mixture the rows prescribe;
            // states a row mentions but the weak move cannot finish at
            // force their rows to carry nothing
            let mut mentioned: BTreeSet<usize> = BTreeSet::new();
            for (&(u, ri), _) in &w_row {
                mentioned.extend(rows[&u][ri].support().copied());
            }
            for &s in &mentioned {
                let mut row = vec![0.0; nvars];
                if let Some(&i) = graph.index.get(&(s, 0)) {
                    if let Some(&sv) = stop_var.get(&i) {
                        row[sv] = 1.0;
                    }
                }
                for (&(u, ri), &v) in &w_row {
                    row[v] -= rows[&u][ri].weight(&s);
                }
                rows_a.push(row);
                rhs.push(0.0);
            }
            // stop states no row ever mentions must stay empty
            for (&i, &sv) in &stop_var {
                let (s, _) = graph.nodes[i];
                if !mentioned.contains(&s) {
                    let mut row = vec![0.0; nvars];
                    row[sv] = 1.0;
                    rows_a.push(row);
                    rhs.push(0.0);
                }
            }
        }
        Coupling::StopWithin { .. } => {}
    }

    let solution = solve_eq_nonneg(&rows_a, &rhs, nvars, LP_TOL)?;
    let mut witness = Vec::new();
    for (&(a, b), &v) in &w_elem {
        if solution[v] > WITNESS_TOL {
            witness.push((a, b));
        }
    }
    Some(witness)
}

/// Decides whether state `s` weakly performs `action` into some
/// distribution related to `target` by the lifting of `rel` (equal-mass
/// coupling over the relation's pairs).
pub fn weak_match(
    p: &Plts,
    s: usize,
    action: &ExtAction,
    target: &SubDistribution<usize>,
    rel: &SimRelation,
) -> bool {
    let mut partners: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in &rel.pairs {
        partners.entry(a).or_default().push(b);
    }
    let diverging = p.divergent_states();
    weak_feasible(
        p,
        &diverging,
        &SubDistribution::point(s),
        action,
        &Coupling::Elements {
            target,
            partners: &partners,
        },
    )
    .is_some()
}

// ---------------------------------------------------------------------------
// simulation checking

struct SimEngine<'p> {
    plts: &'p Plts,
    kind: SimKind,
    left_states: Vec<usize>,
    right_states: Vec<usize>,
    /// surviving partners per left state, as bits and as lists (the lists
    /// feed the coupling constraints, the bits the boolean prefilter)
    partners: BTreeMap<usize, Bits>,
    lists: BTreeMap<usize, Vec<usize>>,
    diverging: BTreeSet<usize>,
    stats: SimStats,
}

impl<'p> SimEngine<'p> {
    fn new(plts: &'p Plts, kind: SimKind, left_root: usize, right_root: usize) -> Self {
        let left_ctx = plts.context_id(left_root);
        let right_ctx = plts.context_id(right_root);
        let left_states: Vec<usize> = (0..plts.len())
            .filter(|&i| plts.context_id(i) == left_ctx)
            .collect();
        let right_states: Vec<usize> = (0..plts.len())
            .filter(|&i| plts.context_id(i) == right_ctx)
            .collect();
        SimEngine {
            plts,
            kind,
            left_states,
            right_states,
            partners: BTreeMap::new(),
            lists: BTreeMap::new(),
            diverging: plts.divergent_states(),
            stats: SimStats::default(),
        }
    }

    fn has(&self, a: usize, b: usize) -> bool {
        self.partners[&a].get(b)
    }

    fn remove(&mut self, a: usize, b: usize) {
        self.partners.get_mut(&a).unwrap().clear(b);
        self.lists.get_mut(&a).unwrap().retain(|&x| x != b);
    }

    /// Seeds the candidate relation with every pair passing the per-state
    /// clause checks: a successful state needs a partner that reaches
    /// success almost surely, and for deadlock simulations a deadlocked
    /// state needs a partner that deadlocks almost surely.
    fn seed(&mut self) {
        let omega_flags: Vec<bool> = (0..self.plts.len()).map(|i| self.plts.omega(i)).collect();
        let as_omega = as_reach_tau(self.plts, &omega_flags);
        let as_delta = if self.kind == SimKind::DivergenceFreeDeadlock {
            let delta_flags: Vec<bool> = (0..self.plts.len())
                .map(|i| self.plts.deadlocked_state(i))
                .collect();
            Some(as_reach_tau(self.plts, &delta_flags))
        } else {
            None
        };
        for &a in &self.left_states {
            let mut bits = Bits::new(self.plts.len());
            let mut list = Vec::new();
            for &b in &self.right_states {
                if self.plts.omega(a) && !as_omega[b] {
                    continue;
                }
                if let Some(asd) = &as_delta {
                    if self.plts.deadlocked_state(a) && !asd[b] {
                        continue;
                    }
                }
                bits.set(b);
                list.push(b);
                self.stats.initial_pairs += 1;
            }
            self.partners.insert(a, bits);
            self.lists.insert(a, list);
        }
    }

    /// Boolean prefilter: the greatest support-graph weak simulation. A
    /// pair survives only if for every challenge of the left state and
    /// every state in its support, the right state can weakly reach some
    /// surviving partner — a necessary condition for any coupling.
    fn boolean_refine(&mut self) {
        let mut reach_cache: BTreeMap<(usize, ExtAction), Bits> = BTreeMap::new();
        let lefts = self.left_states.clone();
        loop {
            let mut changed = false;
            for &a in &lefts {
                let bs = self.lists[&a].clone();
                for b in bs {
                    let mut ok = true;
                    'challenges: for (act, dist) in self.plts.transitions(a) {
                        let reach = reach_cache
                            .entry((b, act.clone()))
                            .or_insert_with(|| weak_reach(self.plts, b, act));
                        for u in dist.support() {
                            if !self.partners[u].intersects(reach) {
                                ok = false;
                                break 'challenges;
                            }
                        }
                    }
                    if !ok {
                        self.remove(a, b);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        self.stats.prefilter_pairs = self.lists.values().map(Vec::len).sum();
    }

    /// Full weak-match check of one pair against the current relation;
    /// returns the pairs the witness coupling rests on.
    fn pair_passes(&mut self, a: usize, b: usize) -> Option<BTreeSet<(usize, usize)>> {
        let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (act, dist) in self.plts.transitions(a) {
            self.stats.lp_calls += 1;
            let witness = weak_feasible(
                self.plts,
                &self.diverging,
                &SubDistribution::point(b),
                act,
                &Coupling::Elements {
                    target: dist,
                    partners: &self.lists,
                },
            )?;
            used.extend(witness);
        }
        Some(used)
    }

    /// Quantitative refinement with witness-dependency tracking: a pair is
    /// rechecked when a pair its last witness rested on was removed. A full
    /// audit sweep then replays every surviving pair against the final
    /// relation; refinement resumes until an entire sweep stays clean.
    fn refine(&mut self, left_root: usize, right_root: usize) -> bool {
        let mut dependents: BTreeMap<(usize, usize), BTreeSet<(usize, usize)>> = BTreeMap::new();
        let mut dirty: VecDeque<(usize, usize)> = VecDeque::new();
        let mut in_dirty: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (&a, list) in &self.lists {
            for &b in list {
                dirty.push_back((a, b));
                in_dirty.insert((a, b));
            }
        }
        loop {
            while let Some((a, b)) = dirty.pop_front() {
                in_dirty.remove(&(a, b));
                if !self.has(a, b) {
                    continue;
                }
                match self.pair_passes(a, b) {
                    Some(used) => {
                        for q in used {
                            dependents.entry(q).or_default().insert((a, b));
                        }
                    }
                    None => {
                        self.remove(a, b);
                        if a == left_root && b == right_root {
                            return false;
                        }
                        if let Some(deps) = dependents.remove(&(a, b)) {
                            for d in deps {
                                if in_dirty.insert(d) {
                                    dirty.push_back(d);
                                }
                            }
                        }
                    }
                }
            }
            if !self.has(left_root, right_root) {
                return false;
            }
            // mandatory self-audit: on any failure, requeue all survivors
            // and refine again
            let mut clean = true;
            'audit: for &a in &self.left_states.clone() {
                for b in self.lists[&a].clone() {
                    if self.pair_passes(a, b).is_none() {
                        self.remove(a, b);
                        clean = false;
                        break 'audit;
                    }
                }
            }
            if clean {
                return self.has(left_root, right_root);
            }
            for (&a, list) in &self.lists {
                for &b in list {
                    if in_dirty.insert((a, b)) {
                        dirty.push_back((a, b));
                    }
                }
            }
        }
    }

    fn into_relation(mut self, kind: SimKind) -> (Option<SimRelation>, SimStats) {
        let mut pairs = BTreeSet::new();
        for (&a, list) in &self.lists {
            for &b in list {
                pairs.insert((a, b));
            }
        }
        self.stats.final_pairs = pairs.len();
        (Some(SimRelation { pairs, kind }), self.stats)
    }
}

fn run_sim(
    m: &Network,
    n: &Network,
    alphabet: &Alphabet,
    bound: usize,
    kind: SimKind,
) -> Result<SimCheck, CheckerError> {
    if interface(m) != interface(n) {
        return Err(CheckerError::InterfaceMismatch);
    }
    let plts = build_plts(&[m.clone(), n.clone()], alphabet, bound)?;
    let left_root = plts.roots()[0];
    let right_root = plts.roots()[1];
    if kind == SimKind::DivergenceFreeDeadlock && !plts.is_convergent() {
        return Err(CheckerError::NotConvergent);
    }
    // Both inputs must be well-formed for any simulation-based argument to
    // carry over to the testing preorders; an ill-formed input is answered
    // with an immediate negative rather than an error.
    if !well_formed(m) || !well_formed(n) {
        return Ok(SimCheck {
            plts,
            left_root,
            right_root,
            relation: None,
            stats: SimStats::default(),
        });
    }
    let mut engine = SimEngine::new(&plts, kind, left_root, right_root);
    engine.seed();
    engine.boolean_refine();
    let (relation, stats) =
        if engine.has(left_root, right_root) && engine.refine(left_root, right_root) {
            engine.into_relation(kind)
        } else {
            let mut stats = engine.stats;
            stats.final_pairs = 0;
            (None, stats)
        };
    Ok(SimCheck {
        plts,
        left_root,
        right_root,
        relation,
        stats,
    })
}

/// Checks whether `n` simulates `m`, by greatest-fixpoint refinement over
/// simple simulations. Both networks must be well-formed; otherwise the
/// check answers negatively without exploring. The returned relation (if
/// any) contains the pair of roots and has been re-verified in full against
/// itself.
pub fn sim_check(
    m: &Network,
    n: &Network,
    alphabet: &Alphabet,
    bound: usize,
) -> Result<SimCheck, CheckerError> {
    run_sim(m, n, alphabet, bound, SimKind::Simulation)
}

/// Checks the divergence-free deadlock simulation between two convergent
/// networks: the simulation clauses plus the deadlock clause. Fails with
/// `NotConvergent` when either network can diverge; answers negatively
/// without exploring when either network is ill-formed.
pub fn dfdsim_check(
    m: &Network,
    n: &Network,
    alphabet: &Alphabet,
    bound: usize,
) -> Result<SimCheck, CheckerError> {
    run_sim(m, n, alphabet, bound, SimKind::DivergenceFreeDeadlock)
}

// ---------------------------------------------------------------------------
// candidate verification for deadlock simulations

/// Verifies a candidate deadlock-simulation relation given as pairs of a
/// network and a sub-distribution over networks (the empty sub-distribution
/// is legal). True iff every pair satisfies the deadlock clause and weakly
/// answers every strong challenge with sub-distribution lifting through the
/// candidate itself.
pub fn dsim_verify(
    candidate: &[(Network, SubDistribution<Network>)],
    alphabet: &Alphabet,
    bound: usize,
) -> Result<bool, CheckerError> {
    // collect every network mentioned anywhere as a root of the joint
    // transition system
    let canon = |net: &Network| Network {
        graph: net.graph.clone(),
        system: canonicalize(&net.system),
        defs: net.defs.clone(),
    };
    let mut roots: Vec<Network> = Vec::new();
    let mut root_ids: BTreeMap<Network, usize> = BTreeMap::new();
    {
        let mut add_root = |net: &Network| {
            let c = canon(net);
            if !root_ids.contains_key(&c) {
                roots.push(c.clone());
                root_ids.insert(c, 0);
            }
        };
        for (m, d) in candidate {
            add_root(m);
            for t in d.support() {
                add_root(t);
            }
        }
    }
    let plts = build_plts(&roots, alphabet, bound)?;
    for (net, &root) in roots.iter().zip(plts.roots()) {
        root_ids.insert(net.clone(), root);
    }

    // candidate rows grouped by left state
    let mut rows: BTreeMap<usize, Vec<SubDistribution<usize>>> = BTreeMap::new();
    for (m, d) in candidate {
        let entries: Vec<(usize, f64)> = d
            .iter()
            .map(|(t, pr)| (root_ids[&canon(t)], pr))
            .collect();
        let dist =
            SubDistribution::from_entries(entries).expect("candidate rows are sub-distributions");
        rows.entry(root_ids[&canon(m)]).or_default().push(dist);
    }

    let diverging = plts.divergent_states();
    let delta_set: BTreeSet<usize> = (0..plts.len())
        .filter(|&i| plts.deadlocked_state(i))
        .collect();

    for (s, dists) in &rows {
        for dist in dists {
            // deadlock clause: a deadlocked left state needs the row to
            // reach a wholly deadlocked distribution internally
            if plts.deadlocked_state(*s)
                && weak_feasible(
                    &plts,
                    &diverging,
                    dist,
                    &ExtAction::Tau,
                    &Coupling::StopWithin {
                        allowed: &delta_set,
                    },
                )
                .is_none()
            {
                return Ok(false);
            }
            // challenge clause
            for (act, target) in plts.transitions(*s) {
                if weak_feasible(
                    &plts,
                    &diverging,
                    dist,
                    act,
                    &Coupling::Rows {
                        target,
                        rows: &rows,
                    },
                )
                .is_none()
                {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}
