use super::{csv_rows, precision, toy_model, Context, ModelSpec};
use crate::config::{overlay, required};
use crate::output::Output;
use crate::svg::{Chart, Series};
use crate::{invalid, CliResult};
use accessbound_core::bounds::{slope_ball, PrecisionModel};
use accessbound_core::cellvolume::{
    estimate_cells, inaccessibility_threshold, CellVolumeDistribution, MedianMethod, ThresholdResult, Weighting,
};
use accessbound_core::geometry::{Norm, SupportGeometry};
use accessbound_core::bounds::ModelGeometry;
use accessbound_core::seed;
use accessbound_toy::support::{estimate_ball, estimate_box, sample_embeddings};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CellSource {
    /// Every cell holds `1/|V|` of the space.
    Dirac,
    /// Explicit `fractions` with `weights`.
    Atoms,
    /// Cells of a toy model's decoder over its measured support box.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum WeightingArg {
    UniformOverTokens,
    VolumeWeighted,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellvolArgs {
    #[arg(long, value_enum)]
    pub source: Option<CellSource>,
    #[arg(long, alias = "vocab")]
    pub vocab_size: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub model_seed: Option<u64>,
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    /// Prompts sampled to measure the support box.
    #[arg(long)]
    pub support_samples: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Points sampled in the support box to estimate cell volumes.
    #[arg(long)]
    pub cell_samples: Option<u64>,
    /// `ln P`; derived from the ball packing of the support when omitted.
    #[arg(long)]
    pub log_packing: Option<f64>,
    /// Ball dimension for deriving `ln P` of dirac and atom sources.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub significand_bits: Option<u32>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub mc_samples: Option<u64>,
    #[arg(long)]
    pub n_cap: Option<u64>,
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
}

overlay!(CellvolArgs {
    source, vocab_size, fractions, weights, preset, model_seed, model_file, support_samples, max_len, cell_samples,
    log_packing, dim, radius, epsilon, significand_bits, method, mc_samples, n_cap, weighting
});

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SourceSpec {
    Dirac { vocab_size: u64 },
    Atoms { fractions: Vec<f64>, weights: Vec<f64> },
    Model { model: ModelSpec, support_samples: usize, max_len: usize, cell_samples: u64 },
}

#[derive(Debug, Serialize)]
struct Resolved {
    source: SourceSpec,
    log_packing: Option<f64>,
    dim: Option<usize>,
    radius: Option<f64>,
    precision: PrecisionModel,
    method: MedianMethod,
    n_cap: u64,
    weighting: Weighting,
}

#[derive(Debug, Serialize)]
struct CellResult {
    log_packing: f64,
    threshold: u64,
    atoms: usize,
    zero_mass_tokens: usize,
    /// Up to ten largest cells as `(token, fraction)`.
    top_cells: Vec<(Option<usize>, f64)>,
    medians: ThresholdResult,
}

fn ball_log_packing(dim: usize, radius: f64, vocab: u64, prec: PrecisionModel) -> CliResult<f64> {
    let geom = ModelGeometry {
        dim,
        vocab_size: vocab.max(2),
        support: SupportGeometry::ball(dim, radius, Norm::Linf)?,
        precision: prec,
        prompt_len: None,
        q: None,
    };
    Ok(slope_ball(&geom)?.log_packing)
}

pub fn run(ctx: &Context, a: CellvolArgs) -> CliResult<String> {
    let prec = precision(a.epsilon, a.significand_bits)?;
    let source = a.source.unwrap_or(if a.fractions.is_some() { CellSource::Atoms } else { CellSource::Dirac });
    let weighting = match a.weighting {
        Some(WeightingArg::VolumeWeighted) => Weighting::VolumeWeighted,
        _ => Weighting::UniformOverTokens,
    };
    let (spec, dist, measured_packing) = match source {
        CellSource::Dirac => {
            let v = required(a.vocab_size, "vocab_size")?;
            (SourceSpec::Dirac { vocab_size: v }, CellVolumeDistribution::dirac(v)?, None)
        }
        CellSource::Atoms => {
            let f = required(a.fractions, "fractions")?;
            let w = a.weights.unwrap_or_else(|| vec![1.0; f.len()]);
            let dist = CellVolumeDistribution::from_atoms(&f, &w)?;
            (SourceSpec::Atoms { fractions: f, weights: w }, dist, None)
        }
        CellSource::Model => {
            let s = ctx.require_seed("cellvol")?;
            let (model, mspec) = toy_model(ctx, "cellvol", a.preset.as_deref(), a.model_file.as_deref(), a.model_seed, "cram")?;
            let support_samples = a.support_samples.unwrap_or(2000);
            let max_len = a.max_len.unwrap_or(24);
            let cell_samples = a.cell_samples.unwrap_or(100_000);
            let sample = sample_embeddings(&model, support_samples, max_len, seed::derive(s, 0))?;
            let (mins, maxs) = estimate_box(&sample)?;
            let dist = estimate_cells(&model.unembedding_rows(), &mins, &maxs, cell_samples, seed::derive(s, 1))?.with_weighting(weighting);
            let lp = ball_log_packing(model.config().dim, estimate_ball(&sample)?.max(f64::MIN_POSITIVE), model.config().vocab as u64, prec)?;
            (SourceSpec::Model { model: mspec, support_samples, max_len, cell_samples }, dist, Some(lp))
        }
    };
    let log_packing = match (a.log_packing, measured_packing, a.dim, a.radius) {
        (Some(lp), _, _, _) => lp,
        (None, Some(lp), _, _) => lp,
        (None, None, Some(d), Some(r)) => ball_log_packing(d, r, 2, prec)?,
        _ => return invalid("missing required field `log_packing` (or `dim` and `radius` to derive it)"),
    };
    let method = match a.method.unwrap_or(if dist.atom_count() == 1 { Method::Exact } else { Method::MonteCarlo }) {
        Method::Exact => MedianMethod::Exact,
        Method::MonteCarlo => {
            MedianMethod::MonteCarlo { samples: a.mc_samples.unwrap_or(100_000), seed: seed::derive(ctx.require_seed("cellvol")?, 2) }
        }
    };
    let n_cap = a.n_cap.unwrap_or(10_000);
    let resolved = Resolved {
        source: spec,
        log_packing: a.log_packing,
        dim: a.dim,
        radius: a.radius,
        precision: prec,
        method,
        n_cap,
        weighting,
    };
    let th = inaccessibility_threshold(&dist, log_packing, method, n_cap)?;
    let ranked = dist.ranked_fractions();
    let res = CellResult {
        log_packing,
        threshold: th.n,
        atoms: dist.atom_count(),
        zero_mass_tokens: dist.zero_mass_tokens,
        top_cells: ranked.iter().take(10).copied().collect(),
        medians: th,
    };

    let mut out = Output::new(&ctx.out_dir, &ctx.emit, "cellvol", ctx.seed, &resolved)?;
    out.csv(
        "cellvol_ranked.csv",
        &csv_rows(
            "rank,token,fraction",
            ranked.iter().enumerate().map(|(i, (t, f))| vec![(i + 1).to_string(), t.map_or_else(String::new, |t| t.to_string()), f.to_string()]),
        ),
    )?;
    out.csv(
        "cellvol_medians.csv",
        &csv_rows(
            "n,log_median,log_ci_low,log_ci_high",
            res.medians.medians.iter().map(|m| vec![m.n.to_string(), m.log_median.to_string(), m.log_ci_low.to_string(), m.log_ci_high.to_string()]),
        ),
    )?;
    out.json("cellvol.json", &res)?;
    let chart = Chart {
        title: "Median log cell fraction of length-n sequences".into(),
        x_label: "n".into(),
        y_label: "ln median".into(),
        series: vec![Series::markers("median", res.medians.medians.iter().map(|m| (m.n as f64, m.log_median)).collect(), 0)],
        hline: Some((-log_packing, "-ln P".into())),
        y_range: None,
    };
    out.svg("cellvol.svg", &chart.render());

    let mut s = format!("atoms {} zero-mass tokens {}\nln P {:.4}\nthreshold n {}\n", res.atoms, res.zero_mass_tokens, log_packing, res.threshold);
    for (t, f) in res.top_cells.iter().take(5) {
        s.push_str(&format!("cell {} fraction {:.6}\n", t.map_or_else(|| "-".into(), |t| t.to_string()), f));
    }
    Ok(s + &out.footer())
}
