//! Seeded random generation of test networks for a given pair of networks
//! under comparison.
//!
//! A generated test occupies every interface vertex of the pair and adds one
//! fresh collector station. Feeders at input vertices inject values drawn
//! from the pair's broadcast vocabulary; listeners at output vertices relay
//! or filter what they hear towards the collector, which succeeds after one
//! or two reports. Composition with either network is always defined: the
//! test's graph only mentions its own vertices, and the tests carry no
//! definitions.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wnet_core::extensional::default_alphabet;
use wnet_core::syntax::{
    interface, ConnGraph, DefEnv, Expr, Name, Network, Process, Ratio, State, SystemTerm, Val,
};

/// A deterministic stream of test networks for one pair under comparison.
pub struct TestGen {
    rng: ChaCha8Rng,
    inputs: Vec<Name>,
    outputs: Vec<Name>,
    channels: Vec<Name>,
    values: Vec<i64>,
    collector: Name,
    collect_chan: Name,
}

fn fresh(base: &str, taken: &BTreeSet<Name>) -> Name {
    let direct = Name::new(base);
    if !taken.contains(&direct) {
        return direct;
    }
    (1u32..)
        .map(|i| Name::new(&format!("{base}{i}")))
        .find(|n| !taken.contains(n))
        .expect("some suffix is fresh")
}

impl TestGen {
    /// Builds a generator for the common interface of the given networks.
    /// The interface and vocabulary are read from the first network; pass
    /// both sides so the vocabulary covers values either can broadcast.
    pub fn new(seed: u64, nets: &[&Network]) -> TestGen {
        let (inputs, outputs) = nets
            .first()
            .map(|n| interface(n))
            .unwrap_or_default();
        let alphabet = default_alphabet(nets);
        let mut channels: Vec<Name> = alphabet.channels.iter().cloned().collect();
        if channels.is_empty() {
            channels.push(Name::new("c"));
        }
        let mut values: Vec<i64> = alphabet
            .values
            .values()
            .flatten()
            .filter_map(|v| match v {
                Val::Int(i) => Some(*i),
                Val::Bool(_) => None,
            })
            .collect();
        values.sort_unstable();
        values.dedup();
        if values.is_empty() {
            values = vec![0, 1];
        }
        let mut taken: BTreeSet<Name> = BTreeSet::new();
        for n in nets {
            taken.extend(n.graph.vertices().cloned());
        }
        let collector = fresh("t", &taken);
        let collect_chan = fresh("tc", &channels.iter().cloned().collect());
        TestGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            inputs: inputs.into_iter().collect(),
            outputs: outputs.into_iter().collect(),
            channels,
            values,
            collector,
            collect_chan,
        }
    }

    /// The next `count` tests of the stream.
    pub fn suite(&mut self, count: usize) -> Vec<Network> {
        (0..count).map(|_| self.next_test()).collect()
    }

    fn pick_channel(&mut self) -> Name {
        self.channels[self.rng.gen_range(0..self.channels.len())].clone()
    }

    fn pick_value(&mut self) -> i64 {
        self.values[self.rng.gen_range(0..self.values.len())]
    }

    fn pick_prob(&mut self) -> Ratio {
        const PROBS: [(u64, u64); 5] = [(1, 2), (1, 4), (3, 4), (9, 10), (1, 10)];
        let (n, d) = PROBS[self.rng.gen_range(0..PROBS.len())];
        Ratio::new(n, d)
    }

    /// A feeder: one or two broadcasts of vocabulary values, occasionally
    /// split by a probabilistic choice.
    fn feeder(&mut self) -> State {
        let mut s = State::Nil;
        for _ in 0..self.rng.gen_range(1..=2) {
            let c = self.pick_channel();
            let v = self.pick_value();
            s = State::Broadcast(c, Expr::Int(v), Process::leaf(s));
        }
        if self.rng.gen_bool(0.25) {
            let c = self.pick_channel();
            let v = self.pick_value();
            let alt = State::Broadcast(c, Expr::Int(v), Process::leaf(State::Nil));
            let p = self.pick_prob();
            State::Tau(Process::choice(Process::leaf(s), p, Process::leaf(alt)))
        } else {
            s
        }
    }

    /// A listener: one or two receives, then a report to the collector —
    /// either the last value heard, a matched-value flag, or nothing.
    fn listener(&mut self) -> State {
        let depth = self.rng.gen_range(1..=2);
        let x = Name::new("x");
        let report = match self.rng.gen_range(0..3) {
            0 => State::Broadcast(
                self.collect_chan.clone(),
                Expr::Var(x.clone()),
                Process::leaf(State::Nil),
            ),
            1 => {
                let v = self.pick_value();
                State::Match(
                    Expr::Bin(
                        wnet_core::syntax::BinOp::Eq,
                        Box::new(Expr::Var(x.clone())),
                        Box::new(Expr::Int(v)),
                    ),
                    Box::new(State::Broadcast(
                        self.collect_chan.clone(),
                        Expr::Int(1),
                        Process::leaf(State::Nil),
                    )),
                    Box::new(State::Nil),
                )
            }
            _ => State::Broadcast(
                self.collect_chan.clone(),
                Expr::Int(0),
                Process::leaf(State::Nil),
            ),
        };
        let mut s = report;
        for i in (0..depth).rev() {
            let c = self.pick_channel();
            let var = if i == depth - 1 { x.clone() } else { Name::new("y") };
            s = State::Receive(c, var, Process::leaf(s));
        }
        s
    }

    /// The collector: succeed after one or two reports, possibly only on a
    /// particular reported value.
    fn collector_state(&mut self) -> State {
        let x = Name::new("x");
        match self.rng.gen_range(0..3) {
            0 => State::Receive(
                self.collect_chan.clone(),
                x,
                Process::leaf(State::Omega),
            ),
            1 => State::Receive(
                self.collect_chan.clone(),
                x.clone(),
                Process::leaf(State::Receive(
                    self.collect_chan.clone(),
                    Name::new("y"),
                    Process::leaf(State::Omega),
                )),
            ),
            _ => {
                let v = self.pick_value();
                State::Receive(
                    self.collect_chan.clone(),
                    x.clone(),
                    Process::leaf(State::Match(
                        Expr::Bin(
                            wnet_core::syntax::BinOp::Eq,
                            Box::new(Expr::Var(x)),
                            Box::new(Expr::Int(v)),
                        ),
                        Box::new(State::Omega),
                        Box::new(State::Nil),
                    )),
                )
            }
        }
    }

    /// Builds the next test network of the stream.
    pub fn next_test(&mut self) -> Network {
        let mut g = ConnGraph::new();
        g.add_vertex(self.collector.clone());
        for v in self.inputs.iter().chain(&self.outputs) {
            g.add_vertex(v.clone());
        }
        for o in self.outputs.clone() {
            g.add_edge(o, self.collector.clone());
        }
        // occasional cross-edges between output listeners let one listener
        // overhear another's report
        for a in self.outputs.clone() {
            for b in self.outputs.clone() {
                if a != b && self.rng.gen_bool(0.25) {
                    if !g.connected(&a, &b) {
                        g.add_edge(a.clone(), b.clone());
                    }
                }
            }
        }
        let mut stations: Vec<(Name, State)> = Vec::new();
        for i in self.inputs.clone() {
            let s = self.feeder();
            stations.push((i, s));
        }
        for o in self.outputs.clone() {
            let s = self.listener();
            stations.push((o, s));
        }
        let coll = if self.inputs.is_empty() && self.outputs.is_empty() {
            State::Tau(Process::leaf(State::Omega))
        } else {
            self.collector_state()
        };
        stations.push((self.collector.clone(), coll));
        let system = SystemTerm::par_all(
            stations
                .into_iter()
                .map(|(n, s)| SystemTerm::Node(n, s)),
        );
        Network::new(g, system, DefEnv::new())
    }
}
