use super::{csv_rows, opt, precision, toy_model, Context, ModelSpec};
use crate::config::overlay;
use crate::output::Output;
use crate::svg::{Chart, Series};
use crate::CliResult;
use accessbound_core::bounds::PrecisionModel;
use accessbound_toy::experiments::presets::{cram_grid_config, cram_study, CramStudy};
use accessbound_toy::experiments::{CramConfig, TargetSource};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SourceArg {
    Random,
    Structured,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CramArgs {
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub model_seed: Option<u64>,
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub memory_lengths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub target_lengths: Option<Vec<usize>>,
    #[arg(long)]
    pub targets_per_cell: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub check_every: Option<usize>,
    #[arg(long, value_enum)]
    pub source: Option<SourceArg>,
    /// Prompts sampled to measure the embedding support.
    #[arg(long)]
    pub support_samples: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub significand_bits: Option<u32>,
}

overlay!(CramArgs {
    preset, model_seed, model_file, memory_lengths, target_lengths, targets_per_cell, max_steps, lr, weight_decay,
    check_every, source, support_samples, epsilon, significand_bits
});

#[derive(Debug, Serialize)]
struct Resolved {
    model: ModelSpec,
    grid: CramConfig,
    support_samples: usize,
    precision: PrecisionModel,
}

pub fn run(ctx: &Context, a: CramArgs) -> CliResult<String> {
    let seed = ctx.require_seed("cram")?;
    let (model, spec) = toy_model(ctx, "cram", a.preset.as_deref(), a.model_file.as_deref(), a.model_seed, "cram")?;
    let mut grid = cram_grid_config(seed);
    if let Some(v) = a.memory_lengths {
        grid.memory_lengths = v;
    }
    if let Some(v) = a.target_lengths {
        grid.target_lengths = v;
    }
    if let Some(v) = a.targets_per_cell {
        grid.targets_per_cell = v;
    }
    if let Some(v) = a.max_steps {
        grid.optimizer.max_steps = v;
    }
    if let Some(v) = a.lr {
        grid.optimizer.adam.lr = v;
    }
    if let Some(v) = a.weight_decay {
        grid.optimizer.adam.weight_decay = v;
    }
    if let Some(v) = a.check_every {
        grid.optimizer.check_every = v;
    }
    if let Some(s) = a.source {
        grid.source = match s {
            SourceArg::Random => TargetSource::Random,
            SourceArg::Structured => TargetSource::Structured,
        };
    }
    grid.validate()?;
    let resolved = Resolved {
        model: spec,
        grid,
        support_samples: a.support_samples.unwrap_or(2000),
        precision: precision(a.epsilon, a.significand_bits)?,
    };
    let study = cram_study(&model, &resolved.grid, resolved.support_samples, resolved.precision)?;
    let mut out = Output::new(&ctx.out_dir, &ctx.emit, "cram", ctx.seed, &resolved)?;
    out.csv("cram_grid.csv", &study.grid.to_csv())?;
    out.csv(
        "cram_fits.csv",
        &csv_rows(
            "m,midpoint,scale,ceiling,n50,r2,extrapolated",
            study.grid.memory_lengths.iter().zip(&study.fits).map(|(m, f)| match f {
                Some(f) => vec![
                    m.to_string(),
                    f.midpoint.to_string(),
                    f.scale.to_string(),
                    f.ceiling.to_string(),
                    opt(f.n50),
                    f.r2.to_string(),
                    f.extrapolated.to_string(),
                ],
                None => vec![m.to_string(), String::new(), String::new(), String::new(), String::new(), String::new(), "true".into()],
            }),
        ),
    )?;
    out.json("cram.json", &study)?;
    out.svg("cram_curves.svg", &curves_chart(&study).render());
    out.svg("cram_n50.svg", &n50_chart(&study).render());
    Ok(summary(&study) + &out.footer())
}

fn curves_chart(study: &CramStudy) -> Chart {
    let mut series = Vec::new();
    let (lo, hi) = (
        *study.grid.target_lengths.iter().min().unwrap_or(&1) as f64,
        *study.grid.target_lengths.iter().max().unwrap_or(&1) as f64,
    );
    for (mi, m) in study.grid.memory_lengths.iter().enumerate() {
        series.push(Series::markers(format!("m={m}"), study.grid.curve(mi), mi));
        if let Some(f) = study.fits[mi] {
            let pts = (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).map(|n| (n, f.eval(n))).collect();
            series.push(Series::line(format!("fit m={m}"), pts, mi));
        }
    }
    Chart {
        title: "Cramming success rate".into(),
        x_label: "target length n".into(),
        y_label: "success rate".into(),
        series,
        hline: Some((0.5, "0.5".into())),
        y_range: Some((0.0, 1.0)),
    }
}

fn n50_chart(study: &CramStudy) -> Chart {
    let pts: Vec<(f64, f64)> = study
        .grid
        .memory_lengths
        .iter()
        .zip(&study.fits)
        .filter_map(|(&m, f)| f.and_then(|f| f.n50).map(|n| (m as f64, n)))
        .collect();
    let mut series = vec![Series::markers("n50", pts.clone(), 0)];
    if let Some(l) = study.line {
        series.push(Series::line("linear fit", pts.iter().map(|&(m, _)| (m, l.slope * m + l.intercept)).collect(), 1).dashed());
    }
    Chart {
        title: "Accessible length versus memory length".into(),
        x_label: "memory length m".into(),
        y_label: "n50".into(),
        series,
        ..Chart::default()
    }
}

fn summary(study: &CramStudy) -> String {
    let mut s = String::from("m n50 r2\n");
    for (m, f) in study.grid.memory_lengths.iter().zip(&study.fits) {
        match f {
            Some(f) => s.push_str(&format!("{m} {} {:.4}\n", f.n50.map_or("-".into(), |n| format!("{n:.3}")), f.r2)),
            None => s.push_str(&format!("{m} - -\n")),
        }
    }
    if let Some(l) = study.line {
        s.push_str(&format!("empirical slope {:.4} (r2 {:.4})\n", l.slope, l.r2));
    }
    s.push_str(&format!("radius {:.4} slope_ball {:.4}\n", study.support.radius, study.support.slope_ball));
    if let Some(r) = study.ratio {
        s.push_str(&format!("ratio {r:.3}\n"));
    }
    s
}
