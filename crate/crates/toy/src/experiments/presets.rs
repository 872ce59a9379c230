//! Toy-scale settings for the cramming and copying studies, and the
//! end-to-end cramming pipeline that compares empirical and theoretical slopes.

use super::copy::CopyConfig;
use super::cram::{accessibility_grid, AccessibilityGrid, CramConfig, CramOptimizer, TargetSource};
use super::fit::{sigmoid_fit, slope_fit, LineFit, SigmoidFit};
use super::optim::AdamConfig;
use crate::support::{sample_embeddings, support_report, SupportReport};
use crate::toymodel::{InitScales, NormKind, Positional, ToyConfig, ToyTransformer};
use crate::Result;
use accessbound_core::bounds::PrecisionModel;
use accessbound_core::seed;
use serde::{Deserialize, Serialize};

/// `d = 8`, `|V| = 16`, one layer, two heads, sup-norm projection.
pub fn cram_model_config() -> ToyConfig {
    ToyConfig::new(16, 8, 1, 2)
}

/// Small token embeddings and a strong attention path, so that soft-prompt
/// columns (which reach later positions only through attention) can steer
/// decoding against the embedding of the current token.
pub fn cram_init() -> InitScales {
    InitScales { embed: 0.1, attention_gain: 4.0, ..InitScales::default() }
}

pub fn cram_model(seed: u64) -> Result<ToyTransformer> {
    ToyTransformer::random(cram_model_config(), &cram_init(), &mut seed::rng(seed, 0))
}

pub fn cram_optimizer() -> CramOptimizer {
    CramOptimizer { adam: AdamConfig { lr: 0.05, ..AdamConfig::default() }, max_steps: 1000, check_every: 50 }
}

/// `m ∈ {1..4}`, `n ∈ {1..24}`, ten random targets per cell.
pub fn cram_grid_config(seed: u64) -> CramConfig {
    CramConfig {
        memory_lengths: (1..=4).collect(),
        target_lengths: (1..=24).collect(),
        targets_per_cell: 10,
        optimizer: cram_optimizer(),
        source: TargetSource::Random,
        seed,
    }
}

/// `d = 16`, ten symbols plus a separator, two layers, two heads, RMS norm,
/// 64 learned positions.
pub fn copy_model_config() -> ToyConfig {
    ToyConfig { norm: NormKind::Rms, positional: Positional::Learned { max_len: 64 }, ..ToyConfig::new(11, 16, 2, 2) }
}

pub fn copy_model(seed: u64) -> Result<ToyTransformer> {
    let init = InitScales { positional: 0.3, ..InitScales::default() };
    ToyTransformer::random(copy_model_config(), &init, &mut seed::rng(seed, 0))
}

pub fn copy_config(seed: u64) -> CopyConfig {
    CopyConfig { seed, ..CopyConfig::default() }
}

/// Grid, fits and the theoretical slope of the measured support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CramStudy {
    pub grid: AccessibilityGrid,
    /// One sigmoid per memory length; `None` where the fit is degenerate.
    pub fits: Vec<Option<SigmoidFit>>,
    /// Line through `(m, n50(m))`; needs at least two usable fits.
    pub line: Option<LineFit>,
    pub support: SupportReport,
    /// `slope_ball / empirical slope`.
    pub ratio: Option<f64>,
}

/// Runs the accessibility grid, fits sigmoids per `m` and a line through
/// `n50(m)`, then estimates the model's embedding support from
/// `support_samples` prompts of length up to the longest target and
/// evaluates the ball slope bound at precision `precision`.
pub fn cram_study(model: &ToyTransformer, cfg: &CramConfig, support_samples: usize, precision: PrecisionModel) -> Result<CramStudy> {
    let grid = accessibility_grid(model, cfg)?;
    let fits: Vec<Option<SigmoidFit>> = (0..cfg.memory_lengths.len()).map(|mi| sigmoid_fit(&grid.curve(mi)).ok()).collect();
    let pts: Vec<(f64, f64)> = cfg
        .memory_lengths
        .iter()
        .zip(&fits)
        .filter_map(|(&m, f)| f.and_then(|f| f.n50).map(|n| (m as f64, n)))
        .collect();
    let line = if pts.len() >= 2 { slope_fit(&pts).ok() } else { None };
    let max_len = cfg.target_lengths.iter().copied().max().unwrap_or(1);
    let sample = sample_embeddings(model, support_samples, max_len, seed::derive(cfg.seed, 0x5u64))?;
    let support = support_report(&sample, model.config().vocab as u64, precision)?;
    let ratio = line.map(|l| support.slope_ball / l.slope);
    Ok(CramStudy { grid, fits, line, support, ratio })
}
