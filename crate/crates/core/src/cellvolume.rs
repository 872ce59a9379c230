//! Decoder-cell volume distribution and the median of its n-fold product.
//!
//! Each token `t` owns the cell of final embeddings on which its logit is
//! largest. If a length-`n` continuation is modeled as `n` independent draws
//! of cell fractions, the fraction of prompt space reaching a typical
//! sequence is the median of the product distribution `D^n`. Once that
//! median falls below `1 / P` (one distinguishable prompt), at least half of
//! the length-`n` sequences are out of reach.

use crate::{seed, Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest tuple count enumerated by the exact median.
pub const EXACT_BUDGET: u64 = 1_000_000;

/// Discrete distribution over cell volume fractions, kept as logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellVolumeDistribution {
    /// `ln(|E_t| / |E|)` per atom.
    pub log_fractions: Vec<f64>,
    /// Probability of each atom; sums to 1.
    pub weights: Vec<f64>,
    /// Token owning each atom, when the atoms come from a decoder.
    #[serde(default)]
    pub tokens: Vec<usize>,
    /// Tokens whose cell was never hit while sampling.
    #[serde(default)]
    pub zero_mass_tokens: usize,
    /// Number of points sampled, zero for synthetic distributions.
    #[serde(default)]
    pub sample_count: u64,
}

/// How atoms of an estimated distribution are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every observed token counts once, as in `D(I) = (1/|V|) Σ_t 1{|E_t|/|E| ∈ I}`.
    #[default]
    UniformOverTokens,
    /// Tokens are drawn in proportion to their cell volume.
    VolumeWeighted,
}

impl CellVolumeDistribution {
    /// Distribution from linear-scale atoms and their probabilities.
    pub fn from_atoms(fractions: &[f64], weights: &[f64]) -> Result<Self> {
        if fractions.is_empty() || fractions.len() != weights.len() {
            return Err(Error::Mismatch("need equally many atoms and weights, at least one".into()));
        }
        if fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::Domain("atoms must be fractions in (0, 1]".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Domain("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        Ok(Self {
            log_fractions: fractions.iter().map(|f| f.ln()).collect(),
            weights: weights.iter().map(|w| w / total).collect(),
            tokens: vec![],
            zero_mass_tokens: 0,
            sample_count: 0,
        })
    }

    /// Every cell has volume `1/|V|`: a point mass there.
    pub fn dirac(vocab_size: u64) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::Domain(format!("vocab size must be >= 2, got {vocab_size}")));
        }
        Ok(Self {
            log_fractions: vec![-(vocab_size as f64).ln()],
            weights: vec![1.0],
            tokens: vec![],
            zero_mass_tokens: 0,
            sample_count: 0,
        })
    }

    /// Reweight the atoms (only meaningful for estimated distributions).
    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        let raw: Vec<f64> = match weighting {
            Weighting::UniformOverTokens => vec![1.0; self.log_fractions.len()],
            Weighting::VolumeWeighted => self.log_fractions.iter().map(|l| l.exp()).collect(),
        };
        let total: f64 = raw.iter().sum();
        self.weights = raw.iter().map(|w| w / total).collect();
        self
    }

    pub fn atom_count(&self) -> usize {
        self.log_fractions.len()
    }

    /// `(token, fraction)` sorted by decreasing fraction; ties by token id.
    pub fn ranked_fractions(&self) -> Vec<(Option<usize>, f64)> {
        let mut out: Vec<(Option<usize>, f64)> =
            (0..self.atom_count()).map(|i| (self.tokens.get(i).copied(), self.log_fractions[i].exp())).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }
}

/// Estimate cell fractions by sampling `n_samples` points uniformly in the
/// box `[mins, maxs]` and tallying the argmax of `decoder · y` (lowest index
/// wins ties). `decoder` has one row per token.
pub fn estimate_cells(decoder: &[Vec<f64>], mins: &[f64], maxs: &[f64], n_samples: u64, seed: u64) -> Result<CellVolumeDistribution> {
    const SHARDS: u64 = 8;
    if decoder.len() < 2 {
        return Err(Error::Domain("decoder needs at least two tokens".into()));
    }
    let d = mins.len();
    if maxs.len() != d || decoder.iter().any(|r| r.len() != d) {
        return Err(Error::Mismatch("decoder rows and box bounds must share one dimension".into()));
    }
    if mins.iter().zip(maxs).any(|(a, b)| !(a <= b)) {
        return Err(Error::Domain("box needs min <= max in every coordinate".into()));
    }
    if n_samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let vocab = decoder.len();
    let tallies: Vec<Vec<u64>> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let n = n_samples / SHARDS + u64::from(shard < n_samples % SHARDS);
            let mut rng = seed::rng(seed, shard);
            let mut counts = vec![0u64; vocab];
            let mut y = vec![0.0; d];
            for _ in 0..n {
                for (v, (lo, hi)) in y.iter_mut().zip(mins.iter().zip(maxs)) {
                    *v = if lo < hi { rng.gen_range(*lo..*hi) } else { *lo };
                }
                counts[argmax_row(decoder, &y)] += 1;
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; vocab];
    for t in &tallies {
        for (c, v) in counts.iter_mut().zip(t) {
            *c += v;
        }
    }
    let observed: Vec<usize> = (0..vocab).filter(|&t| counts[t] > 0).collect();
    let n = n_samples as f64;
    Ok(CellVolumeDistribution {
        log_fractions: observed.iter().map(|&t| (counts[t] as f64 / n).ln()).collect(),
        weights: vec![1.0 / observed.len() as f64; observed.len()],
        tokens: observed.clone(),
        zero_mass_tokens: vocab - observed.len(),
        sample_count: n_samples,
    })
}

/// Index of the largest `row · y`, lowest index on ties.
pub fn argmax_row(rows: &[Vec<f64>], y: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, r) in rows.iter().enumerate() {
        let v: f64 = r.iter().zip(y).map(|(a, b)| a * b).sum();
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MedianMethod {
    /// Enumerate all `atoms^n` tuples.
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

/// Lower median of `ln` of the product of `n` draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianEstimate {
    pub n: u64,
    pub log_median: f64,
    /// 99% confidence interval (order statistics) for Monte-Carlo; equal to
    /// the median for the exact method.
    pub log_ci_low: f64,
    pub log_ci_high: f64,
}

/// Median of `D^n` (log scale).
///
/// The lower median is the smallest value `v` with `P(X <= v) >= 1/2`.
pub fn convolve_median(dist: &CellVolumeDistribution, n: u64, method: MedianMethod) -> Result<MedianEstimate> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    match method {
        MedianMethod::Exact => exact_median(dist, n),
        MedianMethod::MonteCarlo { samples, seed } => {
            let mut mc = MonteCarloMedians::new(dist, samples, seed)?;
            let mut last = None;
            for _ in 0..n {
                last = Some(mc.step());
            }
            Ok(last.expect("n >= 1"))
        }
    }
}

fn exact_median(dist: &CellVolumeDistribution, n: u64) -> Result<MedianEstimate> {
    let k = dist.atom_count() as u64;
    if k == 1 {
        let v = n as f64 * dist.log_fractions[0];
        return Ok(MedianEstimate { n, log_median: v, log_ci_low: v, log_ci_high: v });
    }
    let total = k.checked_pow(n.try_into().unwrap_or(u32::MAX)).filter(|&t| t <= EXACT_BUDGET);
    let Some(_) = total else {
        return Err(Error::Budget(format!("exact median needs {k}^{n} tuples, above the budget of {EXACT_BUDGET}")));
    };
    let mut outcomes: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(outcomes.len() * k as usize);
        for &(v, w) in &outcomes {
            for (lv, lw) in dist.log_fractions.iter().zip(&dist.weights) {
                next.push((v + lv, w * lw));
            }
        }
        outcomes = next;
    }
    let v = lower_median_weighted(&mut outcomes);
    Ok(MedianEstimate { n, log_median: v, log_ci_low: v, log_ci_high: v })
}

fn lower_median_weighted(outcomes: &mut [(f64, f64)]) -> f64 {
    outcomes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = outcomes.iter().map(|o| o.1).sum();
    let mut acc = 0.0;
    for &(v, w) in outcomes.iter() {
        acc += w;
        // relative slack absorbs rounding in the cumulative sum
        if acc >= 0.5 * total * (1.0 - 1e-12) {
            return v;
        }
    }
    outcomes.last().expect("nonempty").0
}

/// Normal quantile used for the 99% order-statistic interval.
const Z_99: f64 = 2.575_829_303_549;

/// Running Monte-Carlo estimate of the medians of `D^1, D^2, ...`, reusing
/// the same random draws across `n` so successive medians are comparable.
pub struct MonteCarloMedians<'a> {
    dist: &'a CellVolumeDistribution,
    cdf: Vec<f64>,
    sums: Vec<f64>,
    rng: rand_chacha::ChaCha8Rng,
    n: u64,
    scratch: Vec<f64>,
}

impl<'a> MonteCarloMedians<'a> {
    pub fn new(dist: &'a CellVolumeDistribution, samples: u64, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Domain("need at least one Monte-Carlo sample".into()));
        }
        let mut acc = 0.0;
        let cdf = dist
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            dist,
            cdf,
            sums: vec![0.0; samples as usize],
            rng: seed::rng(seed, 0),
            n: 0,
            scratch: Vec::with_capacity(samples as usize),
        })
    }

    fn draw(&mut self) -> f64 {
        let u: f64 = self.rng.gen::<f64>() * self.cdf.last().copied().unwrap_or(1.0);
        let i = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        self.dist.log_fractions[i]
    }

    /// Add one more factor to every sample and return the median of `D^n`.
    pub fn step(&mut self) -> MedianEstimate {
        for i in 0..self.sums.len() {
            let v = self.draw();
            self.sums[i] += v;
        }
        self.n += 1;
        self.scratch.clear();
        self.scratch.extend_from_slice(&self.sums);
        self.scratch.sort_by(f64::total_cmp);
        let s = self.scratch.len();
        let mid = s.div_ceil(2) - 1;
        let half_width = 0.5 * Z_99 * (s as f64).sqrt();
        let lo = ((s as f64 / 2.0 - half_width).floor().max(0.0) as usize).min(s - 1);
        let hi = ((s as f64 / 2.0 + half_width).ceil() as usize).min(s - 1);
        MedianEstimate {
            n: self.n,
            log_median: self.scratch[mid],
            log_ci_low: self.scratch[lo],
            log_ci_high: self.scratch[hi],
        }
    }
}

/// Result of the threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// Smallest `n` with `Med(D^n) <= exp(-log_packing)`.
    pub n: u64,
    /// Median trace for `1..=n`.
    pub medians: Vec<MedianEstimate>,
}

/// Smallest `n` such that `Med(D^n) <= 1 / P`, given `ln P`.
///
/// The median of `D^n` cannot increase with `n` when all atoms are at most
/// one, so the first crossing is the answer. Fails with a budget error past
/// `n_cap` (e.g. an atom at exactly 1 carrying half the mass).
pub fn inaccessibility_threshold(dist: &CellVolumeDistribution, log_packing: f64, method: MedianMethod, n_cap: u64) -> Result<ThresholdResult> {
    if !(log_packing > 0.0) {
        return Err(Error::Domain(format!("log packing must be positive, got {log_packing}")));
    }
    if dist.log_fractions.iter().any(|&l| l > 0.0) {
        return Err(Error::Domain("atoms must not exceed 1".into()));
    }
    let target = -log_packing;
    // Dirac: closed form, no search needed
    if dist.atom_count() == 1 && dist.log_fractions[0] < 0.0 {
        let v = dist.log_fractions[0];
        let mut n = ((target / v).ceil() as u64).max(1);
        // guard against the ratio rounding across an integer
        while n > 1 && (n - 1) as f64 * v <= target {
            n -= 1;
        }
        while (n as f64) * v > target {
            n += 1;
        }
        if n > n_cap {
            return Err(Error::Budget(format!("threshold {n} exceeds the cap {n_cap}")));
        }
        let medians = (1..=n).map(|k| exact_median(dist, k)).collect::<Result<_>>()?;
        return Ok(ThresholdResult { n, medians });
    }
    let mut medians = Vec::new();
    match method {
        MedianMethod::Exact => {
            for n in 1..=n_cap {
                let m = exact_median(dist, n)?;
                medians.push(m);
                if m.log_median <= target {
                    return Ok(ThresholdResult { n, medians });
                }
            }
        }
        MedianMethod::MonteCarlo { samples, seed } => {
            let mut mc = MonteCarloMedians::new(dist, samples, seed)?;
            for n in 1..=n_cap {
                let m = mc.step();
                medians.push(m);
                if m.log_median <= target {
                    return Ok(ThresholdResult { n, medians });
                }
            }
        }
    }
    Err(Error::Budget(format!("median of D^n stayed above exp(-{log_packing}) up to the cap n = {n_cap}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms() -> CellVolumeDistribution {
        CellVolumeDistribution::from_atoms(&[0.5, 0.25], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn dirac_examples() {
        let d = CellVolumeDistribution::dirac(4).unwrap();
        assert!((d.log_fractions[0].exp() - 0.25).abs() < 1e-15);
        let m = convolve_median(&d, 5, MedianMethod::Exact).unwrap();
        assert!((m.log_median - 5.0 * (0.25f64).ln()).abs() < 1e-12);
        assert!(CellVolumeDistribution::dirac(1).is_err());
    }

    #[test]
    fn two_atom_exact_median_is_one_eighth() {
        let m = convolve_median(&two_atoms(), 2, MedianMethod::Exact).unwrap();
        assert!((m.log_median - 0.125f64.ln()).abs() < 1e-12);
        let one = convolve_median(&two_atoms(), 1, MedianMethod::Exact).unwrap();
        assert!((one.log_median - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_atom_monte_carlo_covers_exact() {
        let m = convolve_median(&two_atoms(), 2, MedianMethod::MonteCarlo { samples: 20_000, seed: 1 }).unwrap();
        let exact = 0.125f64.ln();
        assert!(m.log_ci_low <= exact && exact <= m.log_ci_high);
    }

    #[test]
    fn exact_refuses_over_budget() {
        let d = CellVolumeDistribution::from_atoms(&[0.1; 10], &[1.0; 10]).unwrap();
        assert!(matches!(convolve_median(&d, 7, MedianMethod::Exact), Err(Error::Budget(_))));
    }

    #[test]
    fn median_nonincreasing() {
        let d = CellVolumeDistribution::from_atoms(&[0.6, 0.3, 0.05, 0.05], &[1.0; 4]).unwrap();
        let mut prev = 0.0;
        for n in 1..=9 {
            let m = convolve_median(&d, n, MedianMethod::Exact).unwrap().log_median;
            assert!(m <= prev + 1e-12);
            prev = m;
        }
    }

    #[test]
    fn dirac_threshold_is_ceiling() {
        let d = CellVolumeDistribution::dirac(3).unwrap();
        let t = inaccessibility_threshold(&d, 3f64.ln(), MedianMethod::Exact, 100).unwrap();
        assert_eq!(t.n, 1);
        let t = inaccessibility_threshold(&d, 10.0, MedianMethod::Exact, 100).unwrap();
        assert_eq!(t.n, (10.0 / 3f64.ln()).ceil() as u64);
        let t = inaccessibility_threshold(&d, 1e-9, MedianMethod::Exact, 100).unwrap();
        assert_eq!(t.n, 1);
    }

    #[test]
    fn atom_at_one_hits_cap() {
        let d = CellVolumeDistribution::from_atoms(&[1.0], &[1.0]).unwrap();
        let r = inaccessibility_threshold(&d, 2.0, MedianMethod::Exact, 50);
        assert!(matches!(r, Err(Error::Budget(_))));
        // 0.99^50 > 1/2, so the median is still 1 at the cap
        let d = CellVolumeDistribution::from_atoms(&[1.0, 0.5], &[0.99, 0.01]).unwrap();
        let r = inaccessibility_threshold(&d, 2.0, MedianMethod::MonteCarlo { samples: 4000, seed: 3 }, 50);
        assert!(matches!(r, Err(Error::Budget(_))));
    }

    #[test]
    fn estimate_single_dominant_row() {
        let f = vec![vec![10.0, 0.0], vec![-10.0, 0.0], vec![0.0, 0.0]];
        let d = estimate_cells(&f, &[1.0, -1.0], &[2.0, 1.0], 1000, 4).unwrap();
        assert_eq!(d.tokens, vec![0]);
        assert_eq!(d.log_fractions, vec![0.0]);
        assert_eq!(d.zero_mass_tokens, 2);
    }

    #[test]
    fn estimate_symmetric_split() {
        let f = vec![vec![1.0], vec![-1.0]];
        let n = 40_000u64;
        let d = estimate_cells(&f, &[-1.0], &[1.0], n, 8).unwrap();
        let p0 = d.log_fractions[0].exp();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((p0 - 0.5).abs() < 3.0 * sigma);
        let total: f64 = d.log_fractions.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranked_profile_is_nonincreasing() {
        let d = CellVolumeDistribution::from_atoms(&[0.1, 0.5, 0.3, 0.1], &[1.0; 4]).unwrap();
        let r = d.ranked_fractions();
        assert!(r.windows(2).all(|w| w[0].1 >= w[1].1));
    }
}
