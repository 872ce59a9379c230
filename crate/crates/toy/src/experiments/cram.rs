//! Cramming: optimize a soft prompt until a frozen model greedily emits a
//! given target, and sweep that test over target and prompt lengths.

use super::optim::{AdamConfig, AdamW};
use crate::toymodel::{argmax, greedy_decode, Input, ToyTransformer};
use crate::{Error, Result};
use accessbound_core::seed;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CramOptimizer {
    pub adam: AdamConfig,
    pub max_steps: usize,
    /// Greedy decoding is checked every this many steps (and at step 0).
    pub check_every: usize,
}

impl Default for CramOptimizer {
    fn default() -> Self {
        CramOptimizer { adam: AdamConfig::default(), max_steps: 1000, check_every: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    /// I.i.d. uniform tokens.
    #[default]
    Random,
    /// A random motif of length 1 to 3 repeated to the target length.
    Structured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CramOutcome {
    pub success: bool,
    pub final_loss: f64,
    pub steps: usize,
    /// The optimized soft prompt.
    pub prompt: Vec<Vec<f64>>,
}

/// Standard deviation of all embedding entries; the scale soft prompts start at.
pub fn embedding_std(model: &ToyTransformer) -> f64 {
    let v = model.config().vocab;
    let vals: Vec<f64> = (0..v).flat_map(|t| model.embedding(t).to_vec()).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt()
}

/// Whether greedy decoding from `prompt` reproduces `target`.
///
/// For a causal model this is one teacher-forced pass: by induction, greedy
/// decoding follows the target exactly when every teacher-forced argmax hits.
pub fn decodes_to(model: &ToyTransformer, prompt: &[Vec<f64>], target: &[usize]) -> Result<bool> {
    let n = target.len();
    if !model.config().causal {
        return Ok(greedy_decode(model, prompt, n)? == target);
    }
    let m = prompt.len();
    let tr = model.forward(&Input { soft: prompt.to_vec(), tokens: target[..n - 1].to_vec() })?;
    Ok(target.iter().enumerate().all(|(i, &t)| argmax(&model.logits_at(&tr, m - 1 + i)) == t))
}

/// Optimizes `m` soft-prompt columns with the model frozen, stopping as soon
/// as greedy decoding reproduces `target`.
pub fn cram_one(model: &ToyTransformer, target: &[usize], m: usize, opt: &CramOptimizer, seed: u64) -> Result<CramOutcome> {
    if m == 0 || target.is_empty() {
        return Err(Error::Domain("cramming needs m >= 1 and a nonempty target".into()));
    }
    if opt.check_every == 0 {
        return Err(Error::Domain("check_every must be positive".into()));
    }
    let d = model.config().dim;
    let std = embedding_std(model).max(1e-3);
    let normal = Normal::new(0.0, std).expect("positive std");
    let mut rng = seed::rng(seed, 0);
    let mut prompt: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| normal.sample(&mut rng)).collect()).collect();
    let mut adam = AdamW::new(opt.adam, m * d);
    let mut flat = vec![0.0; m * d];
    let mut grad = vec![0.0; m * d];
    for step in 0..=opt.max_steps {
        if step % opt.check_every == 0 || step == opt.max_steps {
            if decodes_to(model, &prompt, target)? {
                return Ok(CramOutcome { success: true, final_loss: model.loss(&prompt, target)?, steps: step, prompt });
            }
            if step == opt.max_steps {
                break;
            }
        }
        let g = model.backward(&prompt, target, false)?;
        for (i, col) in prompt.iter().enumerate() {
            flat[i * d..(i + 1) * d].copy_from_slice(col);
            grad[i * d..(i + 1) * d].copy_from_slice(&g.soft[i]);
        }
        adam.step(&mut flat, &grad);
        for (i, col) in prompt.iter_mut().enumerate() {
            col.copy_from_slice(&flat[i * d..(i + 1) * d]);
        }
    }
    Ok(CramOutcome { success: false, final_loss: model.loss(&prompt, target)?, steps: opt.max_steps, prompt })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CramConfig {
    pub memory_lengths: Vec<usize>,
    pub target_lengths: Vec<usize>,
    /// Targets per `(n, m)` cell.
    pub targets_per_cell: usize,
    pub optimizer: CramOptimizer,
    pub source: TargetSource,
    pub seed: u64,
}

impl CramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.targets_per_cell == 0 || self.optimizer.max_steps == 0 {
            return Err(Error::Domain("targets_per_cell and max_steps must be >= 1".into()));
        }
        if self.memory_lengths.contains(&0) || self.target_lengths.contains(&0) || self.memory_lengths.is_empty() || self.target_lengths.is_empty() {
            return Err(Error::Domain("memory and target lengths must be nonempty lists of positive integers".into()));
        }
        Ok(())
    }
}

/// The `k`-th target of length `n`; shared by every memory length so cells
/// along a column of the grid see the same strings.
pub fn make_target(vocab: usize, n: usize, k: usize, source: TargetSource, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed::derive(seed, n as u64), k as u64);
    match source {
        TargetSource::Random => (0..n).map(|_| rng.gen_range(0..vocab)).collect(),
        TargetSource::Structured => {
            let period = rng.gen_range(1..=3usize);
            let motif: Vec<usize> = (0..period).map(|_| rng.gen_range(0..vocab)).collect();
            (0..n).map(|i| motif[i % period]).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessibilityGrid {
    pub memory_lengths: Vec<usize>,
    pub target_lengths: Vec<usize>,
    /// `successes[mi][ni]` out of `trials`.
    pub successes: Vec<Vec<usize>>,
    pub trials: usize,
}

impl AccessibilityGrid {
    pub fn rate(&self, mi: usize, ni: usize) -> f64 {
        self.successes[mi][ni] as f64 / self.trials as f64
    }

    /// `(n, rate)` pairs for memory length index `mi`.
    pub fn curve(&self, mi: usize) -> Vec<(f64, f64)> {
        self.target_lengths.iter().enumerate().map(|(ni, &n)| (n as f64, self.rate(mi, ni))).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,m,rate,trials\n");
        for (mi, &m) in self.memory_lengths.iter().enumerate() {
            for (ni, &n) in self.target_lengths.iter().enumerate() {
                s.push_str(&format!("{n},{m},{},{}\n", self.rate(mi, ni), self.trials));
            }
        }
        s
    }
}

/// Runs [`cram_one`] for every `(m, n, k)`; jobs run in parallel with
/// per-job seeds and are aggregated in a fixed order.
pub fn accessibility_grid(model: &ToyTransformer, cfg: &CramConfig) -> Result<AccessibilityGrid> {
    let outcomes = accessibility_outcomes(model, cfg)?;
    let (nm, nn, k) = (cfg.memory_lengths.len(), cfg.target_lengths.len(), cfg.targets_per_cell);
    let mut successes = vec![vec![0; nn]; nm];
    for (job, ok) in outcomes.iter().enumerate() {
        if *ok {
            successes[job / (nn * k)][(job / k) % nn] += 1;
        }
    }
    Ok(AccessibilityGrid { memory_lengths: cfg.memory_lengths.clone(), target_lengths: cfg.target_lengths.clone(), successes, trials: k })
}

/// Success flags in job order `(m, n, k)` with `k` fastest.
pub fn accessibility_outcomes(model: &ToyTransformer, cfg: &CramConfig) -> Result<Vec<bool>> {
    cfg.validate()?;
    let (nm, nn, k) = (cfg.memory_lengths.len(), cfg.target_lengths.len(), cfg.targets_per_cell);
    let vocab = model.config().vocab;
    (0..nm * nn * k)
        .into_par_iter()
        .map(|job| {
            let (mi, ni, ki) = (job / (nn * k), (job / k) % nn, job % k);
            let n = cfg.target_lengths[ni];
            let target = make_target(vocab, n, ki, cfg.source, cfg.seed);
            let out = cram_one(model, &target, cfg.memory_lengths[mi], &cfg.optimizer, seed::derive(cfg.seed, job as u64))?;
            Ok(out.success)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toymodel::{InitScales, ToyConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> ToyTransformer {
        ToyTransformer::random(ToyConfig::new(16, 8, 1, 2), &InitScales::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn dominant_token_succeeds_immediately() {
        // all logits tie at zero, so token 0 wins everywhere by the tie rule
        let m = ToyTransformer::zeros(ToyConfig::new(4, 2, 1, 1)).unwrap();
        let out = cram_one(&m, &[0], 1, &CramOptimizer::default(), 3).unwrap();
        assert!(out.success);
        assert_eq!(out.steps, 0);
        assert!(cram_one(&m, &[0], 0, &CramOptimizer::default(), 3).is_err());
    }

    #[test]
    fn deterministic_and_verified_by_greedy_decoding() {
        let model = toy();
        let target = make_target(16, 3, 0, TargetSource::Random, 5);
        let a = cram_one(&model, &target, 2, &CramOptimizer::default(), 11).unwrap();
        let b = cram_one(&model, &target, 2, &CramOptimizer::default(), 11).unwrap();
        assert_eq!(a, b);
        if a.success {
            assert_eq!(greedy_decode(&model, &a.prompt, 3).unwrap(), target);
        }
    }

    #[test]
    fn single_target_grid_matches_direct_runs() {
        let model = toy();
        let cfg = CramConfig {
            memory_lengths: vec![1, 2],
            target_lengths: vec![1, 2, 3],
            targets_per_cell: 1,
            optimizer: CramOptimizer { max_steps: 200, ..Default::default() },
            source: TargetSource::Random,
            seed: 4,
        };
        let grid = accessibility_grid(&model, &cfg).unwrap();
        for (mi, &m) in cfg.memory_lengths.iter().enumerate() {
            for (ni, &n) in cfg.target_lengths.iter().enumerate() {
                let job = (mi * 3 + ni) as u64;
                let t = make_target(16, n, 0, cfg.source, cfg.seed);
                let ok = cram_one(&model, &t, m, &cfg.optimizer, seed::derive(cfg.seed, job)).unwrap().success;
                assert_eq!(grid.successes[mi][ni], ok as usize);
            }
        }
    }

    #[test]
    fn structured_targets_are_periodic() {
        let t = make_target(16, 12, 3, TargetSource::Structured, 1);
        assert!((1..=3).any(|p| (p..12).all(|i| t[i] == t[i - p])));
    }
}
