//! Abstract syntax for networks: data expressions, states, probabilistic
//! processes, system terms, connectivity graphs and their combination into
//! networks, plus interpretation of processes as state distributions,
//! canonical forms for structural congruence, well-formedness and
//! interfaces.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::prob::SubDistribution;

/// An interned-style identifier: node, channel, variable or definition name.
///
/// Backed by a string with lexicographic order so that every map and every
/// canonical form in the library is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(String);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(s.to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A closed data value: an integer message or a boolean guard result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Val {
    Int(i64),
    Bool(bool),
}

impl Val {
    /// Coerces to an integer (booleans count as 0/1).
    pub fn as_int(self) -> i64 {
        match self {
            Val::Int(i) => i,
            Val::Bool(b) => b as i64,
        }
    }

    /// Coerces to a boolean (integers are true iff non-zero).
    pub fn as_bool(self) -> bool {
        match self {
            Val::Int(i) => i != 0,
            Val::Bool(b) => b,
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Int(i) => write!(f, "{i}"),
            Val::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// An exact probability in (0, 1), kept as a reduced fraction so that
/// syntax trees stay totally ordered (no floats in the AST).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    /// Builds `num/den` reduced to lowest terms; must lie strictly
    /// between 0 and 1.
    pub fn new(num: u64, den: u64) -> Self {
        assert!(num > 0 && num < den, "probability must lie strictly in (0,1)");
        let g = gcd(num, den);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// The complementary probability 1 - p.
    pub fn complement(&self) -> Ratio {
        Ratio::new(self.den - self.num, self.den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Dyadic/decimal fractions print as finite decimals, the rest as
        // num/den.
        let (mut den2, mut k2) = (self.den, 0u32);
        while den2 % 2 == 0 {
            den2 /= 2;
            k2 += 1;
        }
        let mut k5 = 0u32;
        while den2 % 5 == 0 {
            den2 /= 5;
            k5 += 1;
        }
        if den2 == 1 {
            let digits = k2.max(k5);
            let scale = 10u128.pow(digits) / self.den as u128;
            let frac = self.num as u128 * scale;
            let s = alloc::format!("{frac:0width$}", width = digits as usize);
            write!(f, "0.{}", s.trim_end_matches('0'))
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Binary operators on data expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Le,
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "=",
            BinOp::Le => "<=",
        })
    }
}

/// Data expressions: integer and boolean literals, variables, binary
/// operators and symbolic name constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(Name),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// A symbolic constant; evaluates to the integer encoding of its name,
    /// so distinct short names denote distinct values.
    Const(Name),
}

impl Expr {
    /// Evaluates a closed expression. Total: operands are coerced (booleans
    /// to 0/1 for arithmetic, integers to "non-zero" for guards).
    ///
    /// Panics on free variables; callers close expressions by substitution
    /// first.
    pub fn eval(&self) -> Val {
        match self {
            Expr::Int(i) => Val::Int(*i),
            Expr::Bool(b) => Val::Bool(*b),
            Expr::Var(x) => panic!("evaluating open expression: free variable {x}"),
            Expr::Const(n) => Val::Int(name_code(n)),
            Expr::Bin(op, l, r) => {
                let (l, r) = (l.eval(), r.eval());
                match op {
                    BinOp::Add => Val::Int(l.as_int().wrapping_add(r.as_int())),
                    BinOp::Sub => Val::Int(l.as_int().wrapping_sub(r.as_int())),
                    BinOp::Mul => Val::Int(l.as_int().wrapping_mul(r.as_int())),
                    BinOp::Eq => Val::Bool(l.as_int() == r.as_int()),
                    BinOp::Le => Val::Bool(l.as_int() <= r.as_int()),
                }
            }
        }
    }

    /// Free variables of the expression.
    pub fn free_vars(&self, acc: &mut BTreeSet<Name>) {
        match self {
            Expr::Var(x) => {
                acc.insert(x.clone());
            }
            Expr::Bin(_, l, r) => {
                l.free_vars(acc);
                r.free_vars(acc);
            }
            _ => {}
        }
    }

    pub fn is_closed(&self) -> bool {
        let mut acc = BTreeSet::new();
        self.free_vars(&mut acc);
        acc.is_empty()
    }

    /// Substitutes the value `v` for every free occurrence of `x`.
    pub fn subst(&self, x: &Name, v: Val) -> Expr {
        match self {
            Expr::Var(y) if y == x => match v {
                Val::Int(i) => Expr::Int(i),
                Val::Bool(b) => Expr::Bool(b),
            },
            Expr::Bin(op, l, r) => {
                Expr::Bin(*op, Box::new(l.subst(x, v)), Box::new(r.subst(x, v)))
            }
            other => other.clone(),
        }
    }
}

/// Deterministic integer encoding of a symbolic constant's name.
fn name_code(n: &Name) -> i64 {
    let mut v: i64 = 0;
    for b in n.as_str().bytes() {
        v = v.wrapping_mul(256).wrapping_add(b as i64);
    }
    v
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(x) => write!(f, "{x}"),
            Expr::Const(n) => write!(f, "'{n}"),
            Expr::Bin(op, l, r) => {
                let wrap = |e: &Expr, f: &mut fmt::Formatter<'_>| match e {
                    Expr::Bin(..) => write!(f, "({e})"),
                    _ => write!(f, "{e}"),
                };
                wrap(l, f)?;
                write!(f, " {op} ")?;
                wrap(r, f)
            }
        }
    }
}

/// States: the sequential code placed at nodes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum State {
    /// c!⟨e⟩.p — broadcast the value of `e` on the channel, continue as p.
    Broadcast(Name, Expr, Process),
    /// c?(x).p — receive a value on the channel, binding it to x in p.
    Receive(Name, Name, Process),
    /// The success state of testing; has no transitions of its own.
    Omega,
    Sum(Box<State>, Box<State>),
    Match(Expr, Box<State>, Box<State>),
    Tau(Process),
    Call(Name, Vec<Expr>),
    Nil,
}

/// Processes: states combined by binary probabilistic choice.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Process {
    StateLeaf(Box<State>),
    PChoice(Box<Process>, Ratio, Box<Process>),
}

impl Process {
    pub fn leaf(s: State) -> Process {
        Process::StateLeaf(Box::new(s))
    }

    pub fn choice(l: Process, p: Ratio, r: Process) -> Process {
        Process::PChoice(Box::new(l), p, Box::new(r))
    }
}

impl State {
    pub fn sum(l: State, r: State) -> State {
        State::Sum(Box::new(l), Box::new(r))
    }

    pub fn broadcast(c: &str, e: Expr, p: Process) -> State {
        State::Broadcast(Name::new(c), e, p)
    }

    pub fn receive(c: &str, x: &str, p: Process) -> State {
        State::Receive(Name::new(c), Name::new(x), p)
    }

    pub fn tau(p: Process) -> State {
        State::Tau(p)
    }

    /// Free variables, respecting the receive binder.
    pub fn free_vars(&self, acc: &mut BTreeSet<Name>) {
        match self {
            State::Broadcast(_, e, p) => {
                e.free_vars(acc);
                p_free_vars(p, acc);
            }
            State::Receive(_, x, p) => {
                let mut inner = BTreeSet::new();
                p_free_vars(p, &mut inner);
                inner.remove(x);
                acc.extend(inner);
            }
            State::Sum(l, r) => {
                l.free_vars(acc);
                r.free_vars(acc);
            }
            State::Match(b, l, r) => {
                b.free_vars(acc);
                l.free_vars(acc);
                r.free_vars(acc);
            }
            State::Tau(p) => p_free_vars(p, acc),
            State::Call(_, args) => {
                for a in args {
                    a.free_vars(acc);
                }
            }
            State::Omega | State::Nil => {}
        }
    }

    pub fn is_closed(&self) -> bool {
        let mut acc = BTreeSet::new();
        self.free_vars(&mut acc);
        acc.is_empty()
    }

    /// Substitutes the value `v` for free occurrences of `x`.
    pub fn subst(&self, x: &Name, v: Val) -> State {
        match self {
            State::Broadcast(c, e, p) => {
                State::Broadcast(c.clone(), e.subst(x, v), p_subst(p, x, v))
            }
            State::Receive(c, y, p) if y != x => {
                State::Receive(c.clone(), y.clone(), p_subst(p, x, v))
            }
            State::Receive(..) => self.clone(),
            State::Sum(l, r) => State::sum(l.subst(x, v), r.subst(x, v)),
            State::Match(b, l, r) => State::Match(
                b.subst(x, v),
                Box::new(l.subst(x, v)),
                Box::new(r.subst(x, v)),
            ),
            State::Tau(p) => State::Tau(p_subst(p, x, v)),
            State::Call(a, args) => {
                State::Call(a.clone(), args.iter().map(|e| e.subst(x, v)).collect())
            }
            State::Omega | State::Nil => self.clone(),
        }
    }
}

fn p_free_vars(p: &Process, acc: &mut BTreeSet<Name>) {
    match p {
        Process::StateLeaf(s) => s.free_vars(acc),
        Process::PChoice(l, _, r) => {
            p_free_vars(l, acc);
            p_free_vars(r, acc);
        }
    }
}

fn p_subst(p: &Process, x: &Name, v: Val) -> Process {
    match p {
        Process::StateLeaf(s) => Process::leaf(s.subst(x, v)),
        Process::PChoice(l, q, r) => Process::choice(p_subst(l, x, v), *q, p_subst(r, x, v)),
    }
}

/// Interprets a process as a full distribution over states: a state maps to
/// its point distribution, a choice to the weighted sum of its branches.
pub fn interpret(p: &Process) -> SubDistribution<State> {
    let mut acc: Vec<(State, f64)> = Vec::new();
    collect(p, 1.0, &mut acc);
    SubDistribution::from_entries(acc).expect("process interpretation has unit mass")
}

fn collect(p: &Process, scale: f64, acc: &mut Vec<(State, f64)>) {
    match p {
        Process::StateLeaf(s) => acc.push(((**s).clone(), scale)),
        Process::PChoice(l, q, r) => {
            collect(l, scale * q.as_f64(), acc);
            collect(r, scale * (1.0 - q.as_f64()), acc);
        }
    }
}

/// Environment of recursive definitions A(x̃) ⇐ s.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct DefEnv {
    defs: BTreeMap<Name, (Vec<Name>, State)>,
}

impl DefEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: Name, params: Vec<Name>, body: State) {
        self.defs.insert(name, (params, body));
    }

    pub fn get(&self, name: &Name) -> Option<&(Vec<Name>, State)> {
        self.defs.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &(Vec<Name>, State))> {
        self.defs.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }
}

/// System terms: probabilistic code located at named nodes, composed in
/// parallel.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SystemTerm {
    Node(Name, State),
    Par(Box<SystemTerm>, Box<SystemTerm>),
    Nil,
}

impl SystemTerm {
    pub fn node(name: &str, s: State) -> SystemTerm {
        SystemTerm::Node(Name::new(name), s)
    }

    pub fn par(l: SystemTerm, r: SystemTerm) -> SystemTerm {
        SystemTerm::Par(Box::new(l), Box::new(r))
    }

    /// Parallel composition of a list of components.
    pub fn par_all<I: IntoIterator<Item = SystemTerm>>(terms: I) -> SystemTerm {
        let mut leaves: Vec<SystemTerm> = terms.into_iter().collect();
        match leaves.len() {
            0 => SystemTerm::Nil,
            1 => leaves.pop().unwrap(),
            _ => {
                let mut t = leaves.pop().unwrap();
                while let Some(l) = leaves.pop() {
                    t = SystemTerm::par(l, t);
                }
                t
            }
        }
    }

    /// The set of (occupied) node names; duplicates are reported by
    /// `has_unique_nodes`.
    pub fn nodes(&self) -> BTreeSet<Name> {
        let mut acc = BTreeSet::new();
        self.collect_nodes(&mut acc);
        acc
    }

    fn collect_nodes(&self, acc: &mut BTreeSet<Name>) {
        match self {
            SystemTerm::Node(n, _) => {
                acc.insert(n.clone());
            }
            SystemTerm::Par(l, r) => {
                l.collect_nodes(acc);
                r.collect_nodes(acc);
            }
            SystemTerm::Nil => {}
        }
    }

    pub fn has_unique_nodes(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.check_unique(&mut seen)
    }

    fn check_unique(&self, seen: &mut BTreeSet<Name>) -> bool {
        match self {
            SystemTerm::Node(n, _) => seen.insert(n.clone()),
            SystemTerm::Par(l, r) => l.check_unique(seen) && r.check_unique(seen),
            SystemTerm::Nil => true,
        }
    }

    /// The located states of the term in node order.
    pub fn components(&self) -> Vec<(Name, State)> {
        let mut acc = Vec::new();
        self.collect_components(&mut acc);
        acc
    }

    fn collect_components(&self, acc: &mut Vec<(Name, State)>) {
        match self {
            SystemTerm::Node(n, s) => acc.push((n.clone(), s.clone())),
            SystemTerm::Par(l, r) => {
                l.collect_components(acc);
                r.collect_components(acc);
            }
            SystemTerm::Nil => {}
        }
    }
}

/// A connectivity graph: a finite set of named vertices with an irreflexive
/// edge relation. An edge m → n means n can hear m's broadcasts.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct ConnGraph {
    vertices: BTreeSet<Name>,
    edges: BTreeSet<(Name, Name)>,
}

impl ConnGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, v: Name) {
        self.vertices.insert(v);
    }

    /// Adds a directed edge, inserting missing endpoints. Self-loops are
    /// rejected: the edge relation is irreflexive.
    pub fn add_edge(&mut self, from: Name, to: Name) {
        assert!(from != to, "connectivity is irreflexive");
        self.vertices.insert(from.clone());
        self.vertices.insert(to.clone());
        self.edges.insert((from, to));
    }

    pub fn add_biedge(&mut self, a: Name, b: Name) {
        self.add_edge(a.clone(), b.clone());
        self.add_edge(b, a);
    }

    pub fn connected(&self, from: &Name, to: &Name) -> bool {
        self.edges.contains(&(from.clone(), to.clone()))
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Name> {
        self.vertices.iter()
    }

    pub fn contains_vertex(&self, v: &Name) -> bool {
        self.vertices.contains(v)
    }

    pub fn edges(&self) -> impl Iterator<Item = &(Name, Name)> {
        self.edges.iter()
    }

    pub fn out_neighbors(&self, v: &Name) -> BTreeSet<Name> {
        self.edges
            .iter()
            .filter(|(f, _)| f == v)
            .map(|(_, t)| t.clone())
            .collect()
    }

    pub fn in_neighbors(&self, v: &Name) -> BTreeSet<Name> {
        self.edges
            .iter()
            .filter(|(_, t)| t == v)
            .map(|(f, _)| f.clone())
            .collect()
    }
}

/// A network: a connectivity graph, a system term placing code at some of
/// the vertices, and the definition environment the code draws on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Network {
    pub graph: ConnGraph,
    pub system: SystemTerm,
    pub defs: DefEnv,
}

/// Errors detected by structural validation of a network.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntaxError {
    #[error("node {0} is placed more than once")]
    DuplicateNode(Name),
    #[error("node {0} is not a vertex of the connectivity graph")]
    NodeOutsideGraph(Name),
    #[error("definition {0} is not in scope")]
    UnboundDefinition(Name),
    #[error("definition {name} expects {expected} arguments, got {got}")]
    ArityMismatch {
        name: Name,
        expected: usize,
        got: usize,
    },
    #[error("state at node {0} has free variables")]
    OpenState(Name),
}

impl Network {
    pub fn new(graph: ConnGraph, system: SystemTerm, defs: DefEnv) -> Self {
        Network {
            graph,
            system,
            defs,
        }
    }

    /// Node names occupied by code.
    pub fn nodes(&self) -> BTreeSet<Name> {
        self.system.nodes()
    }

    /// Interface vertices: in the graph but running no code.
    pub fn externals(&self) -> BTreeSet<Name> {
        let occupied = self.nodes();
        self.graph
            .vertices()
            .filter(|v| !occupied.contains(v))
            .cloned()
            .collect()
    }

    /// Checks the basic structural invariants: unique node names, nodes
    /// inside the graph, closed states, resolvable calls with matching
    /// arities (also inside definition bodies).
    pub fn validate(&self) -> Result<(), SyntaxError> {
        let mut seen = BTreeSet::new();
        for (n, s) in self.system.components() {
            if !seen.insert(n.clone()) {
                return Err(SyntaxError::DuplicateNode(n));
            }
            if !self.graph.contains_vertex(&n) {
                return Err(SyntaxError::NodeOutsideGraph(n));
            }
            if !s.is_closed() {
                return Err(SyntaxError::OpenState(n));
            }
            check_calls(&s, &self.defs)?;
        }
        for (_, (params, body)) in self.defs.iter() {
            let mut free = BTreeSet::new();
            body.free_vars(&mut free);
            for p in params {
                free.remove(p);
            }
            // Definition bodies may only mention their parameters.
            if let Some(x) = free.into_iter().next() {
                return Err(SyntaxError::OpenState(x));
            }
            check_calls(body, &self.defs)?;
        }
        Ok(())
    }
}

fn check_calls(s: &State, defs: &DefEnv) -> Result<(), SyntaxError> {
    match s {
        State::Call(a, args) => {
            let Some((params, _)) = defs.get(a) else {
                return Err(SyntaxError::UnboundDefinition(a.clone()));
            };
            if params.len() != args.len() {
                return Err(SyntaxError::ArityMismatch {
                    name: a.clone(),
                    expected: params.len(),
                    got: args.len(),
                });
            }
            Ok(())
        }
        State::Broadcast(_, _, p) | State::Receive(_, _, p) | State::Tau(p) => {
            check_calls_p(p, defs)
        }
        State::Sum(l, r) | State::Match(_, l, r) => {
            check_calls(l, defs)?;
            check_calls(r, defs)
        }
        State::Omega | State::Nil => Ok(()),
    }
}

fn check_calls_p(p: &Process, defs: &DefEnv) -> Result<(), SyntaxError> {
    match p {
        Process::StateLeaf(s) => check_calls(s, defs),
        Process::PChoice(l, _, r) => {
            check_calls_p(l, defs)?;
            check_calls_p(r, defs)
        }
    }
}

/// Canonical form of a system term, identifying structurally congruent
/// terms: parallel components are flattened, Nil units dropped and sorted
/// by node name; inside states, sums are flattened and sorted likewise,
/// closed match guards are resolved, and receive binders are renamed to
/// depth-indexed canonical names. Definition calls are kept nominal (they
/// unfold in the semantics, not here).
pub fn canonicalize(term: &SystemTerm) -> SystemTerm {
    let mut comps: Vec<(Name, State)> = term
        .components()
        .into_iter()
        .map(|(n, s)| (n, canonical_state(&s, &BTreeMap::new(), 0)))
        .collect();
    comps.sort();
    SystemTerm::par_all(comps.into_iter().map(|(n, s)| SystemTerm::Node(n, s)))
}

/// Canonical form of a single closed state (see `canonicalize`).
pub fn canonical_state_closed(s: &State) -> State {
    canonical_state(s, &BTreeMap::new(), 0)
}

fn canonical_binder(depth: usize) -> Name {
    // The '%' prefix is outside the identifier space of any front end, so
    // canonical binders can never capture user-written variables.
    Name(alloc::format!("%{depth}"))
}

fn canonical_state(s: &State, env: &BTreeMap<Name, Name>, depth: usize) -> State {
    match s {
        State::Broadcast(c, e, p) => State::Broadcast(
            c.clone(),
            rename_expr(e, env),
            canonical_process(p, env, depth),
        ),
        State::Receive(c, x, p) => {
            let fresh = canonical_binder(depth);
            let mut env2 = env.clone();
            env2.insert(x.clone(), fresh.clone());
            State::Receive(c.clone(), fresh, canonical_process(p, &env2, depth + 1))
        }
        State::Sum(..) => {
            let mut summands = Vec::new();
            flatten_sum(s, env, depth, &mut summands);
            summands.retain(|t| *t != State::Nil);
            summands.sort();
            match summands.len() {
                0 => State::Nil,
                _ => {
                    let mut it = summands.into_iter().rev();
                    let mut acc = it.next().unwrap();
                    for t in it {
                        acc = State::sum(t, acc);
                    }
                    acc
                }
            }
        }
        State::Match(b, l, r) => {
            let b = rename_expr(b, env);
            if b.is_closed() {
                if b.eval().as_bool() {
                    canonical_state(l, env, depth)
                } else {
                    canonical_state(r, env, depth)
                }
            } else {
                State::Match(
                    b,
                    Box::new(canonical_state(l, env, depth)),
                    Box::new(canonical_state(r, env, depth)),
                )
            }
        }
        State::Tau(p) => State::Tau(canonical_process(p, env, depth)),
        State::Call(a, args) => State::Call(
            a.clone(),
            args.iter().map(|e| rename_expr(e, env)).collect(),
        ),
        State::Omega => State::Omega,
        State::Nil => State::Nil,
    }
}

fn flatten_sum(s: &State, env: &BTreeMap<Name, Name>, depth: usize, acc: &mut Vec<State>) {
    match s {
        State::Sum(l, r) => {
            flatten_sum(l, env, depth, acc);
            flatten_sum(r, env, depth, acc);
        }
        other => acc.push(canonical_state(other, env, depth)),
    }
}

fn canonical_process(p: &Process, env: &BTreeMap<Name, Name>, depth: usize) -> Process {
    match p {
        Process::StateLeaf(s) => Process::leaf(canonical_state(s, env, depth)),
        Process::PChoice(l, q, r) => Process::choice(
            canonical_process(l, env, depth),
            *q,
            canonical_process(r, env, depth),
        ),
    }
}

fn rename_expr(e: &Expr, env: &BTreeMap<Name, Name>) -> Expr {
    match e {
        Expr::Var(x) => match env.get(x) {
            Some(y) => Expr::Var(y.clone()),
            None => e.clone(),
        },
        Expr::Bin(op, l, r) => Expr::Bin(
            *op,
            Box::new(rename_expr(l, env)),
            Box::new(rename_expr(r, env)),
        ),
        other => other.clone(),
    }
}

/// True when no edge joins two external vertices and every external vertex
/// has at least one connection (in either direction) with an occupied node.
pub fn well_formed(net: &Network) -> bool {
    let occupied = net.nodes();
    let is_external = |v: &Name| !occupied.contains(v);
    for (from, to) in net.graph.edges() {
        if is_external(from) && is_external(to) {
            return false;
        }
    }
    net.graph.vertices().filter(|v| is_external(v)).all(|v| {
        net.graph
            .edges()
            .any(|(f, t)| (f == v && occupied.contains(t)) || (t == v && occupied.contains(f)))
    })
}

/// The interface of a well-formed network: input vertices (some occupied
/// node listens within their range) and output vertices (within range of
/// some occupied node). For well-formed networks their union is the whole
/// set of external vertices.
pub fn interface(net: &Network) -> (BTreeSet<Name>, BTreeSet<Name>) {
    let occupied = net.nodes();
    let mut inputs = BTreeSet::new();
    let mut outputs = BTreeSet::new();
    for (from, to) in net.graph.edges() {
        if !occupied.contains(from) && occupied.contains(to) {
            inputs.insert(from.clone());
        }
        if occupied.contains(from) && !occupied.contains(to) {
            outputs.insert(to.clone());
        }
    }
    (inputs, outputs)
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            State::Broadcast(c, e, p) => {
                write!(f, "{c}!<{e}>")?;
                fmt_cont(p, f)
            }
            State::Receive(c, x, p) => {
                write!(f, "{c}?({x})")?;
                fmt_cont(p, f)
            }
            State::Omega => f.write_str("omega"),
            State::Sum(l, r) => {
                fmt_summand(l, f)?;
                f.write_str(" + ")?;
                fmt_summand(r, f)
            }
            State::Match(b, l, r) => {
                write!(f, "if {b} then ")?;
                fmt_summand(l, f)?;
                f.write_str(" else ")?;
                fmt_summand(r, f)
            }
            State::Tau(p) => {
                f.write_str("tau")?;
                fmt_cont(p, f)
            }
            State::Call(a, args) => {
                write!(f, "{a}(")?;
                for (i, e) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str(")")
            }
            State::Nil => f.write_str("nil"),
        }
    }
}

/// Prints a prefix continuation: `.p`, parenthesising anything that does
/// not bind at least as tightly as a prefix.
fn fmt_cont(p: &Process, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match p {
        Process::StateLeaf(s) => match **s {
            State::Nil => Ok(()),
            State::Sum(..) | State::Match(..) => write!(f, ".({s})"),
            _ => write!(f, ".{s}"),
        },
        Process::PChoice(..) => write!(f, ".({p})"),
    }
}

fn fmt_summand(s: &State, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match s {
        State::Match(..) => write!(f, "({s})"),
        _ => write!(f, "{s}"),
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::StateLeaf(s) => write!(f, "{s}"),
            Process::PChoice(l, p, r) => {
                let wrap = |q: &Process, f: &mut fmt::Formatter<'_>| match q {
                    Process::PChoice(..) => write!(f, "({q})"),
                    Process::StateLeaf(s) => match **s {
                        State::Sum(..) | State::Match(..) => write!(f, "({s})"),
                        _ => write!(f, "{s}"),
                    },
                };
                wrap(l, f)?;
                write!(f, " |{p}| ")?;
                wrap(r, f)
            }
        }
    }
}

impl fmt::Display for SystemTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemTerm::Node(n, s) => write!(f, "[{s}]@{n}"),
            SystemTerm::Par(l, r) => write!(f, "{l} || {r}"),
            SystemTerm::Nil => f.write_str("0"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(n: u64, d: u64) -> Ratio {
        Ratio::new(n, d)
    }

    #[test]
    fn interpretation_of_quarter_choice() {
        let s1 = State::broadcast("c", Expr::Int(1), Process::leaf(State::Nil));
        let s2 = State::Nil;
        let p = Process::choice(
            Process::leaf(s1.clone()),
            ratio(1, 4),
            Process::leaf(s2.clone()),
        );
        let d = interpret(&p);
        assert!((d.weight(&s1) - 0.25).abs() < 1e-12);
        assert!((d.weight(&s2) - 0.75).abs() < 1e-12);
        assert!((d.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nested_choice_merges_repeated_states() {
        // (a ⊕½ b) ⊕½ a  =  ¾ a + ¼ b
        let a = State::Tau(Process::leaf(State::Nil));
        let b = State::Nil;
        let inner = Process::choice(
            Process::leaf(a.clone()),
            ratio(1, 2),
            Process::leaf(b.clone()),
        );
        let p = Process::choice(inner, ratio(1, 2), Process::leaf(a.clone()));
        let d = interpret(&p);
        assert!((d.weight(&a) - 0.75).abs() < 1e-12);
        assert!((d.weight(&b) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn canonical_forms_are_order_insensitive() {
        let s = State::broadcast("c", Expr::Int(0), Process::leaf(State::Nil));
        let t = State::receive("c", "x", Process::leaf(State::Nil));
        let m1 = SystemTerm::par(
            SystemTerm::node("n", s.clone()),
            SystemTerm::node("m", t.clone()),
        );
        let m2 = SystemTerm::par(
            SystemTerm::node("m", t),
            SystemTerm::par(SystemTerm::node("n", s), SystemTerm::Nil),
        );
        assert_eq!(canonicalize(&m1), canonicalize(&m2));
    }

    #[test]
    fn closed_match_guards_resolve() {
        let s = State::Match(
            Expr::Bool(true),
            Box::new(State::Omega),
            Box::new(State::Nil),
        );
        let n = SystemTerm::node("n", s);
        assert_eq!(canonicalize(&n), SystemTerm::node("n", State::Omega));
    }

    #[test]
    fn alpha_variants_share_canonical_form() {
        let p1 = State::receive(
            "c",
            "x",
            Process::leaf(State::broadcast(
                "d",
                Expr::Var(Name::new("x")),
                Process::leaf(State::Nil),
            )),
        );
        let p2 = State::receive(
            "c",
            "y",
            Process::leaf(State::broadcast(
                "d",
                Expr::Var(Name::new("y")),
                Process::leaf(State::Nil),
            )),
        );
        assert_eq!(
            canonicalize(&SystemTerm::node("n", p1)),
            canonicalize(&SystemTerm::node("n", p2))
        );
    }

    #[test]
    fn interface_of_chain_network() {
        let mut g = ConnGraph::new();
        g.add_edge(Name::new("e"), Name::new("n"));
        g.add_edge(Name::new("n"), Name::new("o"));
        let system = SystemTerm::node("n", State::Nil);
        let net = Network::new(g, system, DefEnv::new());
        assert!(well_formed(&net));
        let (inputs, outputs) = interface(&net);
        assert_eq!(inputs, BTreeSet::from([Name::new("e")]));
        assert_eq!(outputs, BTreeSet::from([Name::new("o")]));
    }

    #[test]
    fn external_external_edge_is_ill_formed() {
        let mut g = ConnGraph::new();
        g.add_edge(Name::new("m"), Name::new("o1"));
        g.add_edge(Name::new("m"), Name::new("o2"));
        g.add_biedge(Name::new("o1"), Name::new("o2"));
        let net = Network::new(g, SystemTerm::node("m", State::Nil), DefEnv::new());
        assert!(!well_formed(&net));
    }

    #[test]
    fn ratio_prints_as_decimal_when_finite() {
        assert_eq!(alloc::format!("{}", Ratio::new(8, 10)), "0.8");
        assert_eq!(alloc::format!("{}", Ratio::new(1, 2)), "0.5");
        assert_eq!(alloc::format!("{}", Ratio::new(1, 3)), "1/3");
    }
}
