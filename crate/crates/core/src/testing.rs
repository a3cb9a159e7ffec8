//! Testing networks: the value of a sub-distribution, extremal success
//! probabilities over the reduction relation, Hoare/Smith comparisons of
//! result bounds, and finite-suite refutation of the may/must testing
//! preorders.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use thiserror::Error;

use crate::compose::extend;
use crate::intensional::{SemanticsError, StepEngine};
use crate::prob::SubDistribution;
use crate::syntax::{canonicalize, interface, DefEnv, Name, Network, SystemTerm};

/// Default convergence tolerance for value iteration.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Default sweep budget for value iteration.
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// Default cap on reduction-MDP states.
pub const DEFAULT_STATE_BOUND: usize = crate::extensional::DEFAULT_STATE_BOUND;

/// Errors raised while tabulating results.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TestingError {
    #[error("state space exceeded the configured bound of {bound} states")]
    StateSpaceExceeded { bound: usize },
    #[error("value iteration did not converge within {max_iter} sweeps")]
    NonConvergedIteration { max_iter: usize },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// Which end of the result set a value iteration approaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Sup,
    Inf,
}

/// Which testing preorder a refutation attempt targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMode {
    May,
    Must,
}

/// Which comparison of result sets to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareMode {
    Hoare,
    Smith,
}

/// The extrema of the set of success probabilities a network can realise,
/// together with the tolerance and sweep count of the iteration that
/// produced them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultBounds {
    pub sup: f64,
    pub inf: f64,
    pub tolerance: f64,
    pub iterations: usize,
}

/// The probability a sub-distribution over networks assigns to success.
pub fn value(d: &SubDistribution<Network>) -> f64 {
    d.iter()
        .filter(|(net, _)| {
            let mut engine = StepEngine::new(&net.defs);
            engine.omega_pred(net)
        })
        .map(|(_, p)| p)
        .sum()
}

/// The reduction relation of a network, made explicit: states are canonical
/// system terms, each with its nondeterministic choice of reduction
/// distributions. Success states are absorbing; states with no reduction
/// and no success are deadlocked.
#[derive(Debug, Clone)]
pub struct ReductionMdp {
    states: Vec<SystemTerm>,
    reductions: Vec<Vec<SubDistribution<usize>>>,
    omega: Vec<bool>,
}

impl ReductionMdp {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// The root network's state index.
    pub fn root(&self) -> usize {
        0
    }

    pub fn omega(&self, i: usize) -> bool {
        self.omega[i]
    }

    pub fn reductions(&self, i: usize) -> &[SubDistribution<usize>] {
        &self.reductions[i]
    }

    pub fn system(&self, i: usize) -> &SystemTerm {
        &self.states[i]
    }

    /// Runs exactly `k` sweeps of value iteration from the success
    /// indicator, returning the value vector after the last sweep.
    pub fn sweeps(&self, mode: Extremum, k: usize) -> Vec<f64> {
        let mut v = self.indicator();
        for _ in 0..k {
            v = self.sweep(mode, &v);
        }
        v
    }

    fn indicator(&self) -> Vec<f64> {
        self.omega.iter().map(|&w| if w { 1.0 } else { 0.0 }).collect()
    }

    fn sweep(&self, mode: Extremum, v: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                if self.omega[i] {
                    return 1.0;
                }
                let vals = self.reductions[i]
                    .iter()
                    .map(|d| d.iter().map(|(&j, p)| p * v[j]).sum::<f64>());
                match mode {
                    Extremum::Sup => vals.fold(0.0_f64, f64::max),
                    Extremum::Inf => {
                        if self.reductions[i].is_empty() {
                            0.0
                        } else {
                            vals.fold(f64::INFINITY, f64::min)
                        }
                    }
                }
            })
            .collect()
    }

    /// Iterates to convergence: stops when one sweep changes no value by
    /// more than `tol`. Returns the value vector and the number of sweeps.
    pub fn value_iteration(
        &self,
        mode: Extremum,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, usize), TestingError> {
        let mut v = self.indicator();
        for k in 1..=max_iter {
            let next = self.sweep(mode, &v);
            let change = v
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            v = next;
            if change <= tol {
                return Ok((v, k));
            }
        }
        Err(TestingError::NonConvergedIteration { max_iter })
    }
}

/// Explores the reduction relation from a network up to `bound` states.
pub fn build_reduction_mdp(net: &Network, bound: usize) -> Result<ReductionMdp, TestingError> {
    let mut engine = StepEngine::new(&net.defs);
    let mut scratch = Network {
        graph: net.graph.clone(),
        system: SystemTerm::Nil,
        defs: DefEnv::new(),
    };
    let mut states = alloc::vec![canonicalize(&net.system)];
    let mut index: BTreeMap<SystemTerm, usize> = BTreeMap::new();
    index.insert(states[0].clone(), 0);
    let mut reductions: Vec<Vec<SubDistribution<usize>>> = Vec::new();
    let mut omega = Vec::new();
    let mut next = 0usize;
    while next < states.len() {
        let i = next;
        next += 1;
        scratch.system = states[i].clone();
        let success = engine.omega_pred(&scratch);
        omega.push(success);
        if success {
            reductions.push(Vec::new());
            continue;
        }
        let mut outs: Vec<SubDistribution<usize>> = Vec::new();
        for (_, delta) in engine.net_steps(&scratch)? {
            let mut interned: Vec<(usize, f64)> = Vec::new();
            for (sys, p) in delta.map_image(canonicalize).iter() {
                let j = match index.get(sys) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= bound {
                            return Err(TestingError::StateSpaceExceeded { bound });
                        }
                        states.push(sys.clone());
                        index.insert(sys.clone(), states.len() - 1);
                        states.len() - 1
                    }
                };
                interned.push((j, p));
            }
            let dist = SubDistribution::from_entries(interned)
                .expect("reduction distributions have mass at most one");
            if !outs.contains(&dist) {
                outs.push(dist);
            }
        }
        reductions.push(outs);
    }
    Ok(ReductionMdp {
        states,
        reductions,
        omega,
    })
}

/// Computes the extrema of the result set of a network by value iteration
/// over its reduction relation.
pub fn result_bounds(
    net: &Network,
    tol: f64,
    max_iter: usize,
    bound: usize,
) -> Result<ResultBounds, TestingError> {
    let mdp = build_reduction_mdp(net, bound)?;
    let (sup_v, sup_it) = mdp.value_iteration(Extremum::Sup, tol, max_iter)?;
    let (inf_v, inf_it) = mdp.value_iteration(Extremum::Inf, tol, max_iter)?;
    Ok(ResultBounds {
        sup: sup_v[mdp.root()],
        inf: inf_v[mdp.root()],
        tolerance: tol,
        iterations: sup_it.max(inf_it),
    })
}

/// Compares two result-set extrema: Hoare compares the best outcomes,
/// Smith the worst.
pub fn compare_results(a: &ResultBounds, b: &ResultBounds, mode: CompareMode) -> bool {
    let tol = a.tolerance.max(b.tolerance);
    match mode {
        CompareMode::Hoare => a.sup <= b.sup + tol,
        CompareMode::Smith => a.inf <= b.inf + tol,
    }
}

/// Why a finite-suite refutation attempt rejected `m ⊑ n`.
#[derive(Debug, Clone, PartialEq)]
pub enum CounterexampleReport {
    /// The preorders only relate networks with identical interfaces.
    InterfaceMismatch {
        left: (BTreeSet<Name>, BTreeSet<Name>),
        right: (BTreeSet<Name>, BTreeSet<Name>),
    },
    /// A test on which the required comparison of result bounds fails.
    FailingTest {
        index: usize,
        mode: TestMode,
        left: ResultBounds,
        right: ResultBounds,
    },
}

/// Tries to refute `m ⊑ n` (may or must) on a finite suite of tests.
///
/// Tests under which either composition is undefined are skipped. Returns
/// the first counterexample, or `None` if the suite shows nothing — which
/// is no proof that the preorder holds.
pub fn refute(
    m: &Network,
    n: &Network,
    tests: &[Network],
    mode: TestMode,
    tol: f64,
    max_iter: usize,
    bound: usize,
) -> Result<Option<CounterexampleReport>, TestingError> {
    let left_if = interface(m);
    let right_if = interface(n);
    if left_if != right_if {
        return Ok(Some(CounterexampleReport::InterfaceMismatch {
            left: left_if,
            right: right_if,
        }));
    }
    let compare = match mode {
        TestMode::May => CompareMode::Hoare,
        TestMode::Must => CompareMode::Smith,
    };
    for (index, t) in tests.iter().enumerate() {
        let (Some(mt), Some(nt)) = (extend(m, t), extend(n, t)) else {
            continue;
        };
        let left = result_bounds(&mt, tol, max_iter, bound)?;
        let right = result_bounds(&nt, tol, max_iter, bound)?;
        if !compare_results(&left, &right, compare) {
            return Ok(Some(CounterexampleReport::FailingTest {
                index,
                mode,
                left,
                right,
            }));
        }
    }
    Ok(None)
}
