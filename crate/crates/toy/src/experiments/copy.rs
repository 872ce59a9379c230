//! Copying: train a model on `x | x` strings up to a maximum length and
//! measure how exact-match accuracy falls off beyond it.

use super::fit::{sigmoid_fit, SigmoidFit};
use super::optim::{AdamConfig, AdamW};
use crate::toymodel::{argmax, Input, Positional, ToyTransformer};
use crate::{Error, Result};
use accessbound_core::seed;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopyConfig {
    /// Training strings have length `1..=max_len`.
    pub max_len: usize,
    pub batch: usize,
    pub adam: AdamConfig,
    pub max_steps: usize,
    /// Exact match at `max_len` is measured every this many steps (and at step 0).
    pub eval_every: usize,
    pub eval_trials: usize,
    pub seed: u64,
}

impl Default for CopyConfig {
    fn default() -> Self {
        CopyConfig {
            max_len: 12,
            batch: 32,
            adam: AdamConfig { lr: 3e-3, weight_decay: 0.0, ..AdamConfig::default() },
            max_steps: 5000,
            eval_every: 100,
            eval_trials: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopyLog {
    /// Optimizer steps taken.
    pub steps: usize,
    /// Mean per-token training loss at every step.
    pub losses: Vec<f64>,
    /// `(step, exact-match accuracy at max_len)`.
    pub evals: Vec<(usize, f64)>,
    /// Stopped because accuracy at `max_len` reached 1.
    pub converged: bool,
}

/// The last vocabulary entry separates the string from its copy.
pub fn separator(model: &ToyTransformer) -> usize {
    model.config().vocab - 1
}

fn check_copy_model(model: &ToyTransformer, longest: usize) -> Result<()> {
    match model.config().positional {
        Positional::Learned { max_len } if max_len >= 2 * longest => Ok(()),
        Positional::Learned { max_len } => {
            Err(Error::Domain(format!("positional table of {max_len} cannot hold copies of length {longest}")))
        }
        Positional::None => Err(Error::Domain("copying needs learned absolute positions".into())),
    }
}

fn random_string<R: Rng>(rng: &mut R, symbols: usize, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..symbols)).collect()
}

/// `x | x[..n-1]` and the `(position, token)` pairs of the copy region.
fn copy_example(x: &[usize], sep: usize) -> (Input, Vec<(usize, usize)>) {
    let n = x.len();
    let mut tokens = x.to_vec();
    tokens.push(sep);
    tokens.extend_from_slice(&x[..n - 1]);
    let targets = x.iter().enumerate().map(|(i, &t)| (n + i, t)).collect();
    (Input::tokens(tokens), targets)
}

/// Whether greedy decoding after `x |` reproduces `x` exactly.
pub fn copies_exactly(model: &ToyTransformer, x: &[usize]) -> Result<bool> {
    let sep = separator(model);
    let n = x.len();
    if model.config().causal {
        let (input, targets) = copy_example(x, sep);
        let tr = model.forward(&input)?;
        return Ok(targets.iter().all(|&(pos, t)| argmax(&model.logits_at(&tr, pos)) == t));
    }
    let mut tokens = x.to_vec();
    tokens.push(sep);
    for &t in x {
        let tr = model.forward(&Input::tokens(tokens.clone()))?;
        let next = argmax(&tr.logits);
        if next != t {
            return Ok(false);
        }
        tokens.push(next);
    }
    debug_assert_eq!(tokens.len(), 2 * n + 1);
    Ok(true)
}

fn accuracy(model: &ToyTransformer, n: usize, trials: usize, seed: u64) -> Result<f64> {
    let symbols = separator(model);
    let hits = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::rng(seed, k as u64);
            copies_exactly(model, &random_string(&mut rng, symbols, n))
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    Ok(hits as f64 / trials as f64)
}

/// Trains every parameter with teacher-forced cross-entropy on the copy
/// region only, until exact match at `max_len` is perfect or the step
/// budget runs out.
pub fn copy_finetune(mut model: ToyTransformer, cfg: &CopyConfig) -> Result<(ToyTransformer, CopyLog)> {
    if cfg.max_len == 0 || cfg.batch == 0 || cfg.eval_every == 0 || cfg.eval_trials == 0 {
        return Err(Error::Domain("max_len, batch, eval_every and eval_trials must be positive".into()));
    }
    check_copy_model(&model, cfg.max_len)?;
    let symbols = separator(&model);
    let sep = symbols;
    let eval_seed = seed::derive(cfg.seed, u64::MAX);
    let mut adam = AdamW::new(cfg.adam, model.params().len());
    let mut log = CopyLog { steps: 0, losses: Vec::new(), evals: Vec::new(), converged: false };
    for step in 0..=cfg.max_steps {
        if step % cfg.eval_every == 0 || step == cfg.max_steps {
            let acc = accuracy(&model, cfg.max_len, cfg.eval_trials, eval_seed)?;
            log.evals.push((step, acc));
            if acc == 1.0 {
                log.converged = true;
                break;
            }
            if step == cfg.max_steps {
                break;
            }
        }
        let parts = (0..cfg.batch)
            .into_par_iter()
            .map(|b| {
                let mut rng = seed::rng(seed::derive(cfg.seed, step as u64), b as u64);
                let n = rng.gen_range(1..=cfg.max_len);
                let (input, targets) = copy_example(&random_string(&mut rng, symbols, n), sep);
                let g = model.loss_and_grad(&input, &targets, true)?;
                Ok((g.loss, n, g.params.expect("requested")))
            })
            .collect::<Result<Vec<_>>>()?;
        // fixed-order reduction keeps training bit-reproducible
        let mut grad = vec![0.0; model.params().len()];
        let (mut loss, mut count) = (0.0, 0usize);
        for (l, n, g) in parts {
            loss += l;
            count += n;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        let scale = 1.0 / count as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        adam.step(model.params_mut(), &grad);
        log.losses.push(loss * scale);
        log.steps = step + 1;
    }
    Ok((model, log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopyEval {
    pub lengths: Vec<usize>,
    pub accuracy: Vec<f64>,
    /// Sigmoid through `(length, accuracy)`; `None` when accuracy never
    /// crosses 0.5.
    pub fit: Option<SigmoidFit>,
    /// Length at which the fitted accuracy crosses 0.5.
    pub transition_length: Option<f64>,
}

impl CopyEval {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("length,accuracy\n");
        for (n, a) in self.lengths.iter().zip(&self.accuracy) {
            s.push_str(&format!("{n},{a}\n"));
        }
        s
    }
}

/// Exact-match copy accuracy at each length over `trials` random strings.
pub fn copy_eval(model: &ToyTransformer, lengths: &[usize], trials: usize, seed: u64) -> Result<CopyEval> {
    if trials == 0 || lengths.contains(&0) {
        return Err(Error::Domain("need trials >= 1 and positive lengths".into()));
    }
    check_copy_model(model, lengths.iter().copied().max().unwrap_or(1))?;
    let accuracy = lengths
        .iter()
        .map(|&n| accuracy(model, n, trials, seed::derive(seed, n as u64)))
        .collect::<Result<Vec<f64>>>()?;
    let pts: Vec<(f64, f64)> = lengths.iter().zip(&accuracy).map(|(&n, &a)| (n as f64, a)).collect();
    let fit = sigmoid_fit(&pts).ok();
    Ok(CopyEval { lengths: lengths.to_vec(), accuracy, transition_length: fit.and_then(|f| f.n50), fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toymodel::{InitScales, ToyConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn copy_model(seed: u64) -> ToyTransformer {
        let cfg = ToyConfig { positional: Positional::Learned { max_len: 16 }, ..ToyConfig::new(6, 8, 1, 2) };
        ToyTransformer::random(cfg, &InitScales::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn rejects_models_without_positions() {
        let m = ToyTransformer::zeros(ToyConfig::new(6, 8, 1, 2)).unwrap();
        assert!(copy_finetune(m, &CopyConfig::default()).is_err());
    }

    #[test]
    fn perfect_model_stops_at_step_zero() {
        // a model that copies length-1 strings: the separator's column must
        // point to x₁, which a single learned position cannot know, so use the
        // degenerate alphabet of one symbol instead
        let cfg = ToyConfig { positional: Positional::Learned { max_len: 4 }, ..ToyConfig::new(2, 2, 1, 1) };
        let m = ToyTransformer::zeros(cfg).unwrap();
        let (_, log) = copy_finetune(m, &CopyConfig { max_len: 1, ..Default::default() }).unwrap();
        assert_eq!(log.steps, 0);
        assert!(log.converged);
    }

    #[test]
    fn training_is_deterministic_and_lowers_loss() {
        let cfg = CopyConfig { max_len: 3, batch: 8, max_steps: 200, eval_every: 1000, ..Default::default() };
        let (a, la) = copy_finetune(copy_model(1), &cfg).unwrap();
        let (b, lb) = copy_finetune(copy_model(1), &cfg).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(la, lb);
        let head: f64 = la.losses[..50].iter().sum::<f64>() / 50.0;
        let tail: f64 = la.losses[150..].iter().sum::<f64>() / 50.0;
        assert!(tail < head, "{head} -> {tail}");
        let e1 = copy_eval(&a, &[1, 2, 3, 4], 20, 7).unwrap();
        assert_eq!(e1, copy_eval(&a, &[1, 2, 3, 4], 20, 7).unwrap());
        assert!(copy_eval(&a, &[9], 20, 7).is_err());
    }
}
