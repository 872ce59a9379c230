//! Elementary-operation bounds: how many token-count classes a model can tell
//! apart when it cannot notice a small fraction of duplicated or removed
//! tokens.
//!
//! A prompt without positions is a count vector `x ∈ ℕ^D`; vectors that are
//! rational multiples of each other give the same empirical measure. One
//! elementary operation adds or subtracts 1 on a nonzero coordinate.

use crate::{Error, Result};
use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashSet, VecDeque};

/// `x` divided by the gcd of its entries.
pub fn canonicalize(x: &[u64]) -> Result<Vec<u64>> {
    check_counts(x)?;
    let g = x.iter().fold(0u64, |g, &v| g.gcd(&v));
    Ok(x.iter().map(|v| v / g).collect())
}

fn check_counts(x: &[u64]) -> Result<()> {
    if x.is_empty() || x.iter().all(|&v| v == 0) {
        return Err(Error::Domain("count vector must be nonempty with a positive entry".into()));
    }
    Ok(())
}

/// Whether `x` and `y` are rational multiples of each other.
pub fn same_class(x: &[u64], y: &[u64]) -> Result<bool> {
    Ok(canonicalize(x)? == canonicalize(y)?)
}

/// Minimal number of elementary operations turning `x` into `y`, found by
/// breadth-first search; `None` if more than `budget` are needed.
///
/// With `allow_new_support = false` (the default reading) only nonzero
/// coordinates may change, so a coordinate that reaches zero stays there.
/// The all-zero vector is never visited.
pub fn eo_distance(x: &[u64], y: &[u64], budget: u32, allow_new_support: bool) -> Result<Option<u32>> {
    check_counts(x)?;
    check_counts(y)?;
    if x.len() != y.len() {
        return Err(Error::Mismatch(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x == y {
        return Ok(Some(0));
    }
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(x.to_vec());
    queue.push_back((x.to_vec(), 0u32));
    while let Some((v, depth)) = queue.pop_front() {
        if depth == budget {
            continue;
        }
        let total: u64 = v.iter().sum();
        for i in 0..v.len() {
            if v[i] == 0 && !allow_new_support {
                continue;
            }
            let mut up = v.clone();
            up[i] += 1;
            let mut moves = vec![up];
            if v[i] > 0 && total > 1 {
                let mut down = v.clone();
                down[i] -= 1;
                moves.push(down);
            }
            for next in moves {
                if next == y {
                    return Ok(Some(depth + 1));
                }
                if seen.insert(next.clone()) {
                    queue.push_back((next, depth + 1));
                }
            }
        }
    }
    Ok(None)
}

/// Closed form of [`eo_distance`]: `‖x - y‖₁` when `y` is reachable, and
/// `None` when `y` needs a coordinate that is zero in `x` (strict mode).
pub fn eo_distance_closed_form(x: &[u64], y: &[u64], allow_new_support: bool) -> Option<u64> {
    if !allow_new_support && x.iter().zip(y).any(|(&a, &b)| a == 0 && b > 0) {
        return None;
    }
    Some(l1(x, y))
}

fn l1(x: &[u64], y: &[u64]) -> u64 {
    x.iter().zip(y).map(|(&a, &b)| a.abs_diff(b)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EoParams {
    /// Inverse elementary-operation precision.
    pub p: u64,
    /// Number of distinguishable input values.
    pub d: usize,
}

impl EoParams {
    pub fn new(p: u64, d: usize) -> Result<Self> {
        if p == 0 || d == 0 {
            return Err(Error::Domain(format!("need p >= 1 and D >= 1, got p={p}, D={d}")));
        }
        Ok(Self { p, d })
    }
}

/// Which density lemma sets the basis radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisVariant {
    /// `b = ⌈pD/2⌉`, with distance bound `D‖x‖₁ / (2(b - 2))`.
    Coarse,
    /// `b = 2p`, with distance bound `2‖x‖₁ / b`.
    Improved,
}

/// Basis radius `b`; the basis is `{y ∈ ℕ^D : ‖y‖∞ < b}`.
///
/// The coarse lemma divides by `b - 2`, so `b <= 2` is rejected.
pub fn basis_radius(params: EoParams, variant: BasisVariant) -> Result<u64> {
    match variant {
        BasisVariant::Coarse => {
            let b = (params.p * params.d as u64).div_ceil(2);
            if b <= 2 {
                return Err(Error::Degenerate(format!(
                    "coarse basis radius b = {b} for p={}, D={} leaves the bound D|x|/(2(b-2)) undefined",
                    params.p, params.d
                )));
            }
            Ok(b)
        }
        BasisVariant::Improved => Ok(2 * params.p),
    }
}

/// `ln |B| = D ln b`.
pub fn log_basis_size(params: EoParams, variant: BasisVariant) -> Result<f64> {
    Ok(params.d as f64 * (basis_radius(params, variant)? as f64).ln())
}

/// Outcome of an exhaustive density check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub params: EoParams,
    pub variant: BasisVariant,
    pub b: u64,
    pub max_l1: u64,
    pub vectors_checked: u64,
    /// Number of distinct classes among basis vectors (`|B̄|`, versus `b^D`).
    pub distinct_classes: u64,
    /// Largest `dist · factor / ‖x‖₁` with targets restricted to the support of `x`.
    pub max_ratio_strict: f64,
    /// Same, with any target allowed.
    pub max_ratio_permissive: f64,
    pub violations_strict: Vec<Vec<u64>>,
    pub violations_permissive: Vec<Vec<u64>>,
}

impl DensityReport {
    pub fn passed(&self) -> bool {
        self.violations_strict.is_empty() && self.violations_permissive.is_empty()
    }
}

/// Check the density lemma for every `x ∈ ℕ^D` with `1 <= ‖x‖₁ <= max_l1`.
///
/// For each `x` the nearest class is found among integer multiples `k c` of
/// canonical basis vectors `c` with `k ‖c‖∞ <= max_l1 + ‖x‖₁`; larger
/// representatives are farther than `‖x‖₁` and cannot win.
pub fn verify_density(params: EoParams, variant: BasisVariant, max_l1: u64) -> Result<DensityReport> {
    if params.d > 4 || max_l1 > 40 {
        return Err(Error::Budget(format!(
            "exhaustive check limited to D <= 4 and max_l1 <= 40, got D={}, max_l1={max_l1}",
            params.d
        )));
    }
    let b = basis_radius(params, variant)?;
    let dim = params.d;
    let classes = canonical_basis(dim, b);
    // dist * factor / ‖x‖₁ <= 1 is the lemma
    let factor = match variant {
        BasisVariant::Coarse => 2.0 * (b as f64 - 2.0) / dim as f64,
        BasisVariant::Improved => b as f64 / 2.0,
    };

    struct Shard {
        checked: u64,
        ratio_strict: f64,
        ratio_perm: f64,
        bad_strict: Vec<Vec<u64>>,
        bad_perm: Vec<Vec<u64>>,
    }

    let shards: Vec<Shard> = (0..=max_l1)
        .into_par_iter()
        .map(|lead| {
            let mut s = Shard { checked: 0, ratio_strict: 0.0, ratio_perm: 0.0, bad_strict: vec![], bad_perm: vec![] };
            let mut x = vec![0u64; dim];
            x[0] = lead;
            for_each_tail(&mut x, 1, max_l1 - lead, &mut |x| {
                let n: u64 = x.iter().sum();
                if n == 0 {
                    return;
                }
                s.checked += 1;
                let (strict, perm) = nearest_class(x, &classes, max_l1 + n);
                let rs = strict as f64 * factor / n as f64;
                let rp = perm as f64 * factor / n as f64;
                s.ratio_strict = s.ratio_strict.max(rs);
                s.ratio_perm = s.ratio_perm.max(rp);
                if rs > 1.0 + 1e-12 {
                    s.bad_strict.push(x.to_vec());
                }
                if rp > 1.0 + 1e-12 {
                    s.bad_perm.push(x.to_vec());
                }
            });
            s
        })
        .collect();

    let mut report = DensityReport {
        params,
        variant,
        b,
        max_l1,
        vectors_checked: 0,
        distinct_classes: classes.len() as u64,
        max_ratio_strict: 0.0,
        max_ratio_permissive: 0.0,
        violations_strict: vec![],
        violations_permissive: vec![],
    };
    for s in shards {
        report.vectors_checked += s.checked;
        report.max_ratio_strict = report.max_ratio_strict.max(s.ratio_strict);
        report.max_ratio_permissive = report.max_ratio_permissive.max(s.ratio_perm);
        report.violations_strict.extend(s.bad_strict);
        report.violations_permissive.extend(s.bad_perm);
    }
    Ok(report)
}

/// Canonical representatives of all nonzero `y` with `‖y‖∞ < b`.
pub fn canonical_basis(dim: usize, b: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut y = vec![0u64; dim];
    loop {
        // odometer increment in base b
        let mut i = 0;
        loop {
            if i == dim {
                return out;
            }
            y[i] += 1;
            if y[i] < b {
                break;
            }
            y[i] = 0;
            i += 1;
        }
        let g = y.iter().fold(0u64, |g, &v| g.gcd(&v));
        if g == 1 {
            out.push(y.clone());
        }
    }
}

fn for_each_tail(x: &mut Vec<u64>, pos: usize, remaining: u64, f: &mut impl FnMut(&[u64])) {
    if pos == x.len() {
        f(x);
        return;
    }
    for v in 0..=remaining {
        x[pos] = v;
        for_each_tail(x, pos + 1, remaining - v, f);
    }
    x[pos] = 0;
}

/// Smallest `‖x - k c‖₁` over classes and multiples: `(strict, permissive)`,
/// where strict only admits targets whose support lies inside that of `x`.
fn nearest_class(x: &[u64], classes: &[Vec<u64>], max_coord: u64) -> (u64, u64) {
    let mut strict = u64::MAX;
    let mut perm = u64::MAX;
    for c in classes {
        let c_inf = *c.iter().max().expect("nonempty");
        let inside = x.iter().zip(c).all(|(&a, &b)| a > 0 || b == 0);
        for k in 1..=max_coord / c_inf {
            let d: u64 = x.iter().zip(c).map(|(&a, &b)| a.abs_diff(k * b)).sum();
            perm = perm.min(d);
            if inside {
                strict = strict.min(d);
            }
        }
    }
    (strict, perm)
}
