//! Brute-force packings used to sanity-check the packing bounds.
//!
//! A packing here is a set of points with pairwise distance strictly greater
//! than `ε`.

use super::Norm;
use crate::{seed, Error, Result};
use rand::Rng;

/// Largest `ε`-separated subset of points on a line.
///
/// Greedy from the left is optimal in one dimension.
pub fn max_separated_1d(points: &[f64], epsilon: f64) -> usize {
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut count = 0;
    let mut last = f64::NEG_INFINITY;
    for p in sorted {
        if p - last > epsilon {
            count += 1;
            last = p;
        }
    }
    count
}

/// Largest `ε`-separated subset by checking every subset. Exponential; only
/// for cross-checking [`max_separated_1d`] on a handful of points.
pub fn max_separated_exhaustive(points: &[Vec<f64>], epsilon: f64, norm: Norm) -> Result<usize> {
    let n = points.len();
    if n > 20 {
        return Err(Error::Budget(format!("exhaustive packing limited to 20 points, got {n}")));
    }
    let mut conflict = vec![0u32; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let diff: Vec<f64> = points[i].iter().zip(&points[j]).map(|(a, b)| a - b).collect();
                if norm.of(&diff) <= epsilon {
                    conflict[i] |= 1 << j;
                }
            }
        }
    }
    let mut best = 0;
    for mask in 0u32..(1u32 << n) {
        let ok = (0..n).all(|i| mask & (1 << i) == 0 || conflict[i] & mask == 0);
        if ok {
            best = best.max(mask.count_ones() as usize);
        }
    }
    Ok(best)
}

/// Exact packing number of the interval `[-r, r]`: `n` points need
/// `(n - 1) ε < 2r`, so the answer is `ceil(2r / ε)`.
pub fn interval_packing_exact(radius: f64, epsilon: f64) -> usize {
    ((2.0 * radius / epsilon).ceil() as usize).max(1)
}

/// Greedy packing of `[-r, r]` restricted to a grid with `cells` equal steps.
/// Never exceeds the exact value and converges to it as the grid refines.
pub fn interval_packing_grid(radius: f64, epsilon: f64, cells: usize) -> usize {
    let h = 2.0 * radius / cells as f64;
    let grid: Vec<f64> = (0..=cells).map(|i| -radius + i as f64 * h).collect();
    max_separated_1d(&grid, epsilon)
}

/// Randomized greedy packing of the ball `B(0, r)`: draw `candidates` points
/// uniformly in the ball and keep each one farther than `ε` from all kept.
/// The result is a maximal packing of the candidate set.
pub fn greedy_ball_packing(dim: usize, radius: f64, epsilon: f64, norm: Norm, candidates: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed, 0);
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut drawn = 0;
    let mut diff = vec![0.0; dim];
    while drawn < candidates {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect();
        if norm.of(&x) > radius {
            continue;
        }
        drawn += 1;
        let far = kept.iter().all(|k| {
            for (d, (a, b)) in diff.iter_mut().zip(k.iter().zip(&x)) {
                *d = a - b;
            }
            norm.of(&diff) > epsilon
        });
        if far {
            kept.push(x);
        }
    }
    kept
}
