use super::{precision, toy_model, Context, ModelSpec};
use crate::config::overlay;
use crate::output::Output;
use crate::svg::{Chart, Series};
use crate::{invalid, CliError, CliResult};
use accessbound_core::bounds::PrecisionModel;
use accessbound_toy::support::{stability_csv, stability_curve, support_report, EmbeddingSample, SupportReport};
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupportArgs {
    /// Toy preset to probe: `cram` (default) or `copy`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub model_seed: Option<u64>,
    /// Serialized toy model to probe instead of a preset.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    /// External embeddings: CSV with one vector per row.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Vocabulary size for the slope bounds of external embeddings.
    #[arg(long)]
    pub vocab_size: Option<u64>,
    /// Prompts sampled per maximal length.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Maximal prompt lengths of the stability curve.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub significand_bits: Option<u32>,
}

overlay!(SupportArgs { preset, model_seed, model_file, embeddings, vocab_size, samples, lengths, epsilon, significand_bits });

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Source {
    Model { model: ModelSpec, samples: usize, lengths: Vec<usize> },
    Embeddings { sha256: String, vocab_size: u64 },
}

#[derive(Debug, Serialize)]
struct Resolved {
    source: Source,
    precision: PrecisionModel,
}

/// Numeric rows of a CSV; `#` lines, blank lines and a non-numeric header are skipped.
pub fn parse_vectors(text: &str) -> CliResult<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.iter().all(|x| x.is_finite()) => rows.push(v),
            Ok(_) => return invalid(format!("line {}: non-finite value", i + 1)),
            Err(_) if rows.is_empty() => continue,
            Err(e) => return invalid(format!("line {}: {e}", i + 1)),
        }
    }
    if rows.is_empty() {
        return invalid("no embedding vectors found");
    }
    Ok(rows)
}

fn read_embeddings(path: &Path) -> CliResult<(Vec<Vec<f64>>, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok((parse_vectors(&text)?, hex::encode(Sha256::digest(text.as_bytes()))))
}

pub fn run(ctx: &Context, a: SupportArgs) -> CliResult<String> {
    let prec = precision(a.epsilon, a.significand_bits)?;
    let (resolved, reports) = if let Some(path) = &a.embeddings {
        if a.preset.is_some() || a.model_file.is_some() || a.model_seed.is_some() {
            return invalid("`embeddings` excludes `preset`, `model_seed` and `model_file`");
        }
        let vocab_size = crate::config::required(a.vocab_size, "vocab_size")?;
        let (vectors, sha256) = read_embeddings(path)?;
        let report = support_report(&EmbeddingSample::external(vectors)?, vocab_size, prec)?;
        (Resolved { source: Source::Embeddings { sha256, vocab_size }, precision: prec }, vec![report])
    } else {
        let seed = ctx.require_seed("support")?;
        let (model, spec) = toy_model(ctx, "support", a.preset.as_deref(), a.model_file.as_deref(), a.model_seed, "cram")?;
        let samples = a.samples.unwrap_or(2000);
        let lengths = a.lengths.unwrap_or_else(|| vec![1, 2, 4, 8, 16, 24]);
        let reports = stability_curve(&model, &lengths, samples, prec, seed)?;
        (Resolved { source: Source::Model { model: spec, samples, lengths }, precision: prec }, reports)
    };

    let mut out = Output::new(&ctx.out_dir, &ctx.emit, "support", ctx.seed, &resolved)?;
    out.csv("support.csv", &stability_csv(&reports))?;
    out.json("support.json", &reports)?;
    if reports.len() > 1 {
        let pts = |f: fn(&SupportReport) -> f64| reports.iter().map(|r| (r.max_len as f64, f(r))).collect::<Vec<_>>();
        let chart = Chart {
            title: "Slope bounds versus prompt length".into(),
            x_label: "maximal prompt length".into(),
            y_label: "slope bound".into(),
            series: vec![
                Series::line("ball", pts(|r| r.slope_ball), 0),
                Series::line("cone", pts(|r| r.slope_cone), 1),
                Series::line("ellipsoid", pts(|r| r.slope_ellipsoid), 2),
            ],
            ..Chart::default()
        };
        out.svg("support.svg", &chart.render());
    }

    let mut s = String::from("max_len radius angle slope_ball slope_cone slope_ellipsoid\n");
    for r in &reports {
        s.push_str(&format!(
            "{} {:.4} {:.4} {:.4} {:.4} {:.4}\n",
            r.max_len, r.radius, r.angle, r.slope_ball, r.slope_cone, r.slope_ellipsoid
        ));
    }
    Ok(s + &out.footer())
}
