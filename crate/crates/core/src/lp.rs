//! Numeric back-ends for the lifting and weak-transition checks: a dense
//! Phase-I simplex for linear feasibility over non-negative variables, and
//! an Edmonds–Karp max-flow on dense capacity matrices.
//!
//! Both are deliberately small and dependency-free; the systems produced by
//! the checkers stay in the low thousands of variables, well inside what a
//! dense tableau handles comfortably.

use alloc::vec;
use alloc::vec::Vec;

/// Finds `x >= 0` with `A x = b`, if such an `x` exists.
///
/// Every row of `a` must have length `n_vars`. Returns a basic feasible
/// solution, or `None` when the system is infeasible (Phase-I optimum
/// bounded away from zero). `tol` is used for pivot admission and for the
/// final feasibility test, scaled by the magnitude of `b`.
pub(crate) fn solve_eq_nonneg(
    a: &[Vec<f64>],
    b: &[f64],
    n_vars: usize,
    tol: f64,
) -> Option<Vec<f64>> {
    let m = a.len();
    debug_assert_eq!(b.len(), m);
    let cols = n_vars + m + 1; // structural vars, artificials, rhs
    let rhs = cols - 1;

    // Tableau rows 0..m are constraints (with b normalised non-negative and
    // an artificial basis), row m is the Phase-I objective: minimise the sum
    // of artificials. Reduced costs of structural columns start at minus the
    // column sums; the objective cell holds -z.
    let mut t = vec![vec![0.0f64; cols]; m + 1];
    let mut scale = 1.0f64;
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n_vars {
            t[i][j] = flip * a[i][j];
        }
        t[i][n_vars + i] = 1.0;
        t[i][rhs] = flip * b[i];
        scale += flip * b[i];
    }
    for j in 0..n_vars {
        let mut s = 0.0;
        for i in 0..m {
            s += t[i][j];
        }
        t[m][j] = -s;
    }
    let mut z = 0.0;
    for i in 0..m {
        z += t[i][rhs];
    }
    t[m][rhs] = -z;

    let mut basis: Vec<usize> = (n_vars..n_vars + m).collect();
    let piv_tol = tol.max(1e-12);
    let max_pivots = 10_000 + 200 * (m + n_vars);

    for _ in 0..max_pivots {
        // Bland's rule: enter the lowest-index column with a negative
        // reduced cost; guarantees termination up to round-off.
        let Some(c) = (0..cols - 1).find(|&j| t[m][j] < -piv_tol) else {
            break;
        };
        let mut row: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][c] > piv_tol {
                let ratio = t[i][rhs] / t[i][c];
                let better = match row {
                    None => true,
                    Some(r) => {
                        ratio < best - piv_tol
                            || (ratio < best + piv_tol && basis[i] < basis[r])
                    }
                };
                if better {
                    row = Some(i);
                    best = ratio;
                }
            }
        }
        // Phase-I objectives are bounded below, so an unbounded ray only
        // arises from round-off; treat it as infeasible.
        let r = row?;
        let p = t[r][c];
        for j in 0..cols {
            t[r][j] /= p;
        }
        for i in 0..=m {
            if i != r {
                let f = t[i][c];
                if f != 0.0 {
                    for j in 0..cols {
                        t[i][j] -= f * t[r][j];
                    }
                }
            }
        }
        basis[r] = c;
    }

    let objective = -t[m][rhs];
    if objective > tol * scale {
        return None;
    }
    let mut x = vec![0.0f64; n_vars];
    for i in 0..m {
        if basis[i] < n_vars {
            x[basis[i]] = t[i][rhs].max(0.0);
        }
    }
    Some(x)
}

/// Computes a maximum flow from `source` to `sink` on the dense capacity
/// matrix `cap`, returning the value and the flow matrix.
///
/// Augmenting paths are found breadth-first, so the number of augmentations
/// is bounded independently of the (fractional) capacities.
pub(crate) fn max_flow(
    cap: &[Vec<f64>],
    source: usize,
    sink: usize,
    tol: f64,
) -> (f64, Vec<Vec<f64>>) {
    let n = cap.len();
    let mut residual: Vec<Vec<f64>> = cap.to_vec();
    let mut value = 0.0f64;
    let eps = tol.max(1e-12);

    loop {
        // BFS for a shortest augmenting path in the residual graph.
        let mut prev = vec![usize::MAX; n];
        prev[source] = source;
        let mut queue = alloc::collections::VecDeque::new();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for v in 0..n {
                if prev[v] == usize::MAX && residual[u][v] > eps {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            break;
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while v != source {
            let u = prev[v];
            bottleneck = bottleneck.min(residual[u][v]);
            v = u;
        }
        let mut v = sink;
        while v != source {
            let u = prev[v];
            residual[u][v] -= bottleneck;
            residual[v][u] += bottleneck;
            v = u;
        }
        value += bottleneck;
    }

    let mut flow = vec![vec![0.0f64; n]; n];
    for u in 0..n {
        for v in 0..n {
            let f = cap[u][v] - residual[u][v];
            if f > 0.0 {
                flow[u][v] = f;
            }
        }
    }
    (value, flow)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_system_is_solved() {
        // x0 + x1 = 1, x0 - x1 = 0  =>  x0 = x1 = 1/2
        let a = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
        let b = vec![1.0, 0.0];
        let x = solve_eq_nonneg(&a, &b, 2, 1e-9).expect("feasible");
        assert!((x[0] - 0.5).abs() < 1e-9);
        assert!((x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_system_is_rejected() {
        // x0 = 1 and x0 = 2 cannot both hold.
        let a = vec![vec![1.0], vec![1.0]];
        let b = vec![1.0, 2.0];
        assert!(solve_eq_nonneg(&a, &b, 1, 1e-9).is_none());
    }

    #[test]
    fn negativity_requirement_is_enforced() {
        // x0 - x1 = -1 with x0, x1 >= 0 is feasible (x1 = 1), but
        // x0 + x1 = -1 is not.
        let a = vec![vec![1.0, -1.0]];
        let x = solve_eq_nonneg(&a, &[-1.0], 2, 1e-9).expect("feasible");
        assert!((x[0] - x[1] + 1.0).abs() < 1e-9);
        assert!(solve_eq_nonneg(&[vec![1.0, 1.0]], &[-1.0], 2, 1e-9).is_none());
    }

    #[test]
    fn max_flow_saturates_bipartite_demands() {
        // source 0, sink 1, left {2,3}, right {4,5}; all pairs connected.
        let mut cap = vec![vec![0.0; 6]; 6];
        cap[0][2] = 0.5;
        cap[0][3] = 0.5;
        cap[2][4] = 1.0;
        cap[2][5] = 1.0;
        cap[3][4] = 1.0;
        cap[3][5] = 1.0;
        cap[4][1] = 0.25;
        cap[5][1] = 0.75;
        let (value, flow) = max_flow(&cap, 0, 1, 1e-9);
        assert!((value - 1.0).abs() < 1e-9);
        assert!((flow[4][1] - 0.25).abs() < 1e-9);
    }
}
