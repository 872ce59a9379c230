//! Permutation-invariant distances between equal-length vector sequences,
//! and Wasserstein distances between their empirical measures.

use crate::geometry::Norm;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Exhaustive search is only offered up to this many columns (9! = 362880).
pub const MAX_EXHAUSTIVE: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Try every permutation.
    Exhaustive,
    /// Hungarian algorithm for finite `q`, bottleneck matching for `q = ∞`.
    #[default]
    Assignment,
}

fn check_pair(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<usize> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Mismatch(format!("sequence lengths {} and {} (need equal, >= 1)", x.len(), y.len())));
    }
    let d = x[0].len();
    if x.iter().chain(y).any(|c| c.len() != d) {
        return Err(Error::Mismatch("all columns must share one dimension".into()));
    }
    Ok(x.len())
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0) {
        return Err(Error::Domain(format!("q must be >= 1 or infinite, got {q}")));
    }
    Ok(())
}

fn cost_matrix(x: &[Vec<f64>], y: &[Vec<f64>], ground: Norm) -> Vec<Vec<f64>> {
    let mut diff = vec![0.0; x[0].len()];
    x.iter()
        .map(|a| {
            y.iter()
                .map(|b| {
                    for (d, (u, v)) in diff.iter_mut().zip(a.iter().zip(b)) {
                        *d = u - v;
                    }
                    ground.of(&diff)
                })
                .collect()
        })
        .collect()
}

/// `d_q(X, Y) = min_π (Σ_i ‖x_i - y_π(i)‖^q)^{1/q}`, and for `q = ∞` the
/// bottleneck `min_π max_i ‖x_i - y_π(i)‖`.
pub fn perm_distance(x: &[Vec<f64>], y: &[Vec<f64>], q: f64, ground: Norm, solver: Solver) -> Result<f64> {
    let n = check_pair(x, y)?;
    check_q(q)?;
    let cost = cost_matrix(x, y, ground);
    match solver {
        Solver::Exhaustive => {
            if n > MAX_EXHAUSTIVE {
                return Err(Error::Budget(format!("exhaustive search limited to n <= {MAX_EXHAUSTIVE}, got {n}")));
            }
            Ok(exhaustive(&cost, q))
        }
        Solver::Assignment if q.is_infinite() => Ok(bottleneck_assignment(&cost)),
        Solver::Assignment => {
            let powered: Vec<Vec<f64>> = cost.iter().map(|r| r.iter().map(|c| c.powf(q)).collect()).collect();
            let perm = hungarian(&powered);
            let total: f64 = perm.iter().enumerate().map(|(i, &j)| powered[i][j]).sum();
            Ok(total.powf(1.0 / q))
        }
    }
}

/// `W_q(M(X), M(Y)) = n^{-1/q} d_q(X, Y)`, and `W_∞ = d_∞`.
pub fn wasserstein_empirical(x: &[Vec<f64>], y: &[Vec<f64>], q: f64, ground: Norm, solver: Solver) -> Result<f64> {
    let d = perm_distance(x, y, q, ground, solver)?;
    if q.is_infinite() {
        Ok(d)
    } else {
        Ok(d * (x.len() as f64).powf(-1.0 / q))
    }
}

fn exhaustive(cost: &[Vec<f64>], q: f64) -> f64 {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let eval = |p: &[usize]| -> f64 {
        if q.is_infinite() {
            p.iter().enumerate().fold(0.0, |m, (i, &j)| m.max(cost[i][j]))
        } else {
            p.iter().enumerate().map(|(i, &j)| cost[i][j].powf(q)).sum()
        }
    };
    let mut best = eval(&perm);
    // Heap's algorithm, iterative form
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    if q.is_infinite() {
        best
    } else {
        best.powf(1.0 / q)
    }
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn–Munkres with
/// potentials, O(n³)). Returns `perm` with row `i` assigned to column `perm[i]`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based arrays; column 0 is a virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    perm
}

/// Smallest `t` such that a perfect matching uses only edges with cost `<= t`.
///
/// Bisection over the sorted distinct costs with a bipartite-matching
/// feasibility test; the optimum is always one of the entries.
pub fn bottleneck_assignment(cost: &[Vec<f64>]) -> f64 {
    let mut values: Vec<f64> = cost.iter().flatten().copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let (mut lo, mut hi) = (0usize, values.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if has_perfect_matching(cost, values[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    values[lo]
}

fn has_perfect_matching(cost: &[Vec<f64>], t: f64) -> bool {
    let n = cost.len();
    let mut match_col: Vec<Option<usize>> = vec![None; n];
    fn augment(i: usize, cost: &[Vec<f64>], t: f64, seen: &mut [bool], match_col: &mut [Option<usize>]) -> bool {
        for j in 0..cost.len() {
            if cost[i][j] <= t && !seen[j] {
                seen[j] = true;
                if match_col[j].is_none_or(|k| augment(k, cost, t, seen, match_col)) {
                    match_col[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    (0..n).all(|i| {
        let mut seen = vec![false; n];
        augment(i, cost, t, &mut seen, &mut match_col)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn worked_examples() {
        let x = seq(&[0.0, 2.0]);
        let y = seq(&[1.0, 3.0]);
        for s in [Solver::Exhaustive, Solver::Assignment] {
            assert_eq!(perm_distance(&x, &x, 2.0, Norm::L2, s).unwrap(), 0.0);
            assert!((perm_distance(&x, &y, 1.0, Norm::L2, s).unwrap() - 2.0).abs() < 1e-12);
            assert!((wasserstein_empirical(&x, &y, 1.0, Norm::L2, s).unwrap() - 1.0).abs() < 1e-12);
            let a = seq(&[0.0, 1.0]);
            let b = seq(&[1.0, 0.0]);
            assert_eq!(perm_distance(&a, &b, f64::INFINITY, Norm::L2, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn duplicated_sequences_keep_wasserstein() {
        let x = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]];
        let y = vec![vec![1.0, 1.0], vec![0.0, 0.0], vec![-1.0, 2.0]];
        let xx: Vec<_> = x.iter().chain(&x).cloned().collect();
        let yy: Vec<_> = y.iter().chain(&y).cloned().collect();
        for q in [1.0, 2.0, 3.5, f64::INFINITY] {
            let a = wasserstein_empirical(&x, &y, q, Norm::L2, Solver::Assignment).unwrap();
            let b = wasserstein_empirical(&xx, &yy, q, Norm::L2, Solver::Assignment).unwrap();
            assert!((a - b).abs() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn hungarian_small_matrix() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let p = hungarian(&c);
        let total: f64 = p.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn errors() {
        let x = seq(&[0.0, 1.0]);
        assert!(perm_distance(&x, &seq(&[0.0]), 1.0, Norm::L2, Solver::Assignment).is_err());
        assert!(perm_distance(&x, &x, 0.5, Norm::L2, Solver::Assignment).is_err());
        let big = seq(&[0.0; 10]);
        assert!(perm_distance(&big, &big, 1.0, Norm::L2, Solver::Exhaustive).is_err());
        let bad = vec![vec![0.0], vec![0.0, 1.0]];
        assert!(perm_distance(&bad, &bad, 1.0, Norm::L2, Solver::Assignment).is_err());
    }
}
