//! Finite-support sub-probability distributions, weighted sums, images
//! under functions, and the lifting of relations from elements to
//! sub-distributions, decided by max-flow or linear feasibility.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::lp;

/// Comparison tolerance used throughout the library unless overridden.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Errors from sub-distribution arithmetic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbError {
    /// A weighted combination of sub-distributions exceeded unit mass.
    #[error("combined mass {mass} exceeds 1")]
    MassExceeded { mass: f64 },
}

/// A sub-probability distribution with finite support: a map from elements
/// to strictly positive weights whose sum (the mass) is at most 1.
///
/// The empty map is a legal value — the empty sub-distribution, which shows
/// up as the result of fully divergent behaviour.
#[derive(Debug, Clone, PartialEq)]
pub struct SubDistribution<T: Ord> {
    entries: BTreeMap<T, f64>,
}

impl<T: Ord> Default for SubDistribution<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T: Ord> SubDistribution<T> {
    /// The empty sub-distribution (mass 0).
    pub fn empty() -> Self {
        SubDistribution {
            entries: BTreeMap::new(),
        }
    }

    /// The point distribution assigning weight 1 to `value`.
    pub fn point(value: T) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(value, 1.0);
        SubDistribution { entries }
    }

    /// Builds a sub-distribution from (element, weight) pairs, merging
    /// duplicate elements and dropping negligible weights.
    ///
    /// Weights must be non-negative; the total may not exceed unit mass.
    pub fn from_entries<I>(pairs: I) -> Result<Self, ProbError>
    where
        I: IntoIterator<Item = (T, f64)>,
    {
        let mut entries: BTreeMap<T, f64> = BTreeMap::new();
        for (value, weight) in pairs {
            assert!(
                weight >= -DEFAULT_TOLERANCE,
                "negative weight in sub-distribution"
            );
            if weight > 0.0 {
                *entries.entry(value).or_insert(0.0) += weight;
            }
        }
        entries.retain(|_, w| *w > DEFAULT_TOLERANCE);
        let d = SubDistribution { entries };
        let mass = d.mass();
        if mass > 1.0 + DEFAULT_TOLERANCE {
            return Err(ProbError::MassExceeded { mass });
        }
        Ok(d)
    }

    /// The total weight of the sub-distribution; 1 for full distributions.
    pub fn mass(&self) -> f64 {
        self.entries.values().sum()
    }

    /// True when the support is empty.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of elements in the support.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// The weight of `value`, zero when outside the support.
    pub fn weight(&self, value: &T) -> f64 {
        self.entries.get(value).copied().unwrap_or(0.0)
    }

    /// Iterates over the support in element order.
    pub fn support(&self) -> impl Iterator<Item = &T> {
        self.entries.keys()
    }

    /// Iterates over (element, weight) pairs in element order.
    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.entries.iter().map(|(t, w)| (t, *w))
    }

    /// Multiplies every weight by `factor` in [0, 1].
    pub fn scale(&self, factor: f64) -> Self
    where
        T: Clone,
    {
        assert!(
            (-DEFAULT_TOLERANCE..=1.0 + DEFAULT_TOLERANCE).contains(&factor),
            "scale factor outside [0, 1]"
        );
        let mut entries = BTreeMap::new();
        for (t, w) in &self.entries {
            let scaled = w * factor;
            if scaled > DEFAULT_TOLERANCE {
                entries.insert(t.clone(), scaled);
            }
        }
        SubDistribution { entries }
    }

    /// Pointwise sum of two sub-distributions.
    pub fn add(&self, other: &Self) -> Result<Self, ProbError>
    where
        T: Clone,
    {
        Self::weighted_sum(&[1.0, 1.0], &[self, other])
    }

    /// The weighted sum Σᵢ weightsᵢ · distsᵢ.
    ///
    /// This is a partial operation: it is defined exactly when the combined
    /// mass stays within unit mass.
    pub fn weighted_sum(weights: &[f64], dists: &[&Self]) -> Result<Self, ProbError>
    where
        T: Clone,
    {
        assert_eq!(weights.len(), dists.len(), "weight/distribution mismatch");
        let mut entries: BTreeMap<T, f64> = BTreeMap::new();
        for (p, d) in weights.iter().zip(dists) {
            assert!(*p >= -DEFAULT_TOLERANCE, "negative weight in sum");
            if *p <= 0.0 {
                continue;
            }
            for (t, w) in &d.entries {
                *entries.entry(t.clone()).or_insert(0.0) += p * w;
            }
        }
        entries.retain(|_, w| *w > DEFAULT_TOLERANCE);
        let d = SubDistribution { entries };
        let mass = d.mass();
        if mass > 1.0 + DEFAULT_TOLERANCE {
            return Err(ProbError::MassExceeded { mass });
        }
        Ok(d)
    }

    /// The image of the sub-distribution under `f`: weights of elements
    /// mapped to the same image are merged, so mass is preserved.
    pub fn map_image<U, F>(&self, mut f: F) -> SubDistribution<U>
    where
        U: Ord,
        F: FnMut(&T) -> U,
    {
        let mut entries: BTreeMap<U, f64> = BTreeMap::new();
        for (t, w) in &self.entries {
            *entries.entry(f(t)).or_insert(0.0) += *w;
        }
        SubDistribution { entries }
    }

    /// True when both sub-distributions give every element the same weight
    /// up to `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.entries
            .keys()
            .chain(other.entries.keys())
            .all(|t| (self.weight(t) - other.weight(t)).abs() <= tol)
    }
}

impl<T: Ord + fmt::Display> fmt::Display for SubDistribution<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "<empty>");
        }
        for (i, (t, w)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{w}*{t}")?;
        }
        Ok(())
    }
}

/// The image of a pair of sub-distributions under a two-argument function:
/// independent product weights, merged along equal images.
pub fn product_image<T1, T2, U, F>(
    mut f: F,
    d1: &SubDistribution<T1>,
    d2: &SubDistribution<T2>,
) -> SubDistribution<U>
where
    T1: Ord,
    T2: Ord,
    U: Ord,
    F: FnMut(&T1, &T2) -> U,
{
    let mut entries: BTreeMap<U, f64> = BTreeMap::new();
    for (t1, w1) in &d1.entries {
        for (t2, w2) in &d2.entries {
            *entries.entry(f(t1, t2)).or_insert(0.0) += w1 * w2;
        }
    }
    SubDistribution { entries }
}

/// A decomposition certifying a lifting: the left sub-distribution is the
/// weighted sum of the point distributions of the middle components, the
/// right one is the weighted sum of the right components, and every
/// (middle, right) pair belongs to the relation that was checked.
#[derive(Debug, Clone)]
pub struct LiftWitness<T: Ord> {
    pub decomposition: Vec<(f64, T, SubDistribution<T>)>,
}

impl<T: Ord + Clone> LiftWitness<T> {
    /// Recombines the decomposition into the certified pair.
    pub fn recombine(&self) -> (SubDistribution<T>, SubDistribution<T>) {
        let mut left: BTreeMap<T, f64> = BTreeMap::new();
        let mut right: BTreeMap<T, f64> = BTreeMap::new();
        for (p, s, theta) in &self.decomposition {
            *left.entry(s.clone()).or_insert(0.0) += *p;
            for (t, w) in &theta.entries {
                *right.entry(t.clone()).or_insert(0.0) += p * w;
            }
        }
        left.retain(|_, w| *w > 0.0);
        right.retain(|_, w| *w > 0.0);
        (
            SubDistribution { entries: left },
            SubDistribution { entries: right },
        )
    }

    /// True when recombining reproduces `left` and `right` within `tol`.
    pub fn certifies(
        &self,
        left: &SubDistribution<T>,
        right: &SubDistribution<T>,
        tol: f64,
    ) -> bool {
        let (l, r) = self.recombine();
        l.approx_eq(left, tol) && r.approx_eq(right, tol)
    }
}

/// Decides whether `left` is related to `right` under the lifting of the
/// element-to-element relation `rel`, where each pair (s, t) is read as
/// relating s to the point distribution of t.
///
/// Mass must agree on both sides; the decision is exact max-flow
/// feasibility on the bipartite support graph. Returns a witness on
/// success, `None` otherwise.
pub fn lift_check_elements<T>(
    rel: &[(T, T)],
    left: &SubDistribution<T>,
    right: &SubDistribution<T>,
    tol: f64,
) -> Option<LiftWitness<T>>
where
    T: Ord + Clone,
{
    if (left.mass() - right.mass()).abs() > tol {
        return None;
    }
    let lefts: Vec<&T> = left.support().collect();
    let rights: Vec<&T> = right.support().collect();
    let l_index: BTreeMap<&T, usize> = lefts.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let r_index: BTreeMap<&T, usize> = rights.iter().enumerate().map(|(i, t)| (*t, i)).collect();

    // Nodes: 0 source, 1 sink, then left support, then right support.
    let n = 2 + lefts.len() + rights.len();
    let mut cap = vec![vec![0.0f64; n]; n];
    for (i, t) in lefts.iter().enumerate() {
        cap[0][2 + i] = left.weight(t);
    }
    for (j, t) in rights.iter().enumerate() {
        cap[2 + lefts.len() + j][1] = right.weight(t);
    }
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (s, t) in rel {
        if let (Some(&i), Some(&j)) = (l_index.get(s), r_index.get(t)) {
            edges.insert((i, j));
        }
    }
    for &(i, j) in &edges {
        // Any capacity >= 1 is effectively unbounded here.
        cap[2 + i][2 + lefts.len() + j] = 2.0;
    }

    let (value, flow) = lp::max_flow(&cap, 0, 1, tol);
    if value < right.mass() - tol {
        return None;
    }
    let mut decomposition = Vec::new();
    for &(i, j) in &edges {
        let w = flow[2 + i][2 + lefts.len() + j];
        if w > 1e-12 {
            decomposition.push((
                w,
                lefts[i].clone(),
                SubDistribution::point(rights[j].clone()),
            ));
        }
    }
    Some(LiftWitness { decomposition })
}

/// Decides whether `left` is related to `right` under the lifting of the
/// element-to-sub-distribution relation `rel`.
///
/// One decomposition weight per relation row whose element occurs in the
/// support of `left`; the recombination conditions form a linear system
/// solved for feasibility over non-negative weights.
pub fn lift_check_subdist<T>(
    rel: &[(T, SubDistribution<T>)],
    left: &SubDistribution<T>,
    right: &SubDistribution<T>,
    tol: f64,
) -> Option<LiftWitness<T>>
where
    T: Ord + Clone,
{
    let rows: Vec<&(T, SubDistribution<T>)> = rel
        .iter()
        .filter(|(s, _)| left.weight(s) > 0.0)
        .collect();
    for s in left.support() {
        if !rows.iter().any(|(r, _)| r == s) {
            return None;
        }
    }

    // Column space: all elements mentioned on the right of any usable row
    // or in the support of `right`.
    let mut columns: BTreeSet<&T> = right.support().collect();
    for (_, theta) in &rows {
        columns.extend(theta.support());
    }
    let columns: Vec<&T> = columns.into_iter().collect();

    let n_vars = rows.len();
    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    for s in left.support() {
        let mut row = vec![0.0; n_vars];
        for (i, (r, _)) in rows.iter().enumerate() {
            if r == s {
                row[i] = 1.0;
            }
        }
        a.push(row);
        b.push(left.weight(s));
    }
    for t in &columns {
        let mut row = vec![0.0; n_vars];
        for (i, (_, theta)) in rows.iter().enumerate() {
            row[i] = theta.weight(t);
        }
        a.push(row);
        b.push(right.weight(t));
    }

    let x = lp::solve_eq_nonneg(&a, &b, n_vars, tol)?;
    let mut decomposition = Vec::new();
    for (i, (s, theta)) in rows.iter().enumerate() {
        if x[i] > 1e-12 {
            decomposition.push((x[i], s.clone(), theta.clone()));
        }
    }
    Some(LiftWitness { decomposition })
}
