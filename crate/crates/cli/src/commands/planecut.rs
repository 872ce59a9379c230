use super::{toy_model, Context, ModelSpec};
use crate::config::overlay;
use crate::output::Output;
use crate::{invalid, CliResult};
use accessbound_toy::support::sample_embeddings;
use accessbound_toy::toymodel::plane_cut_map;
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanecutArgs {
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub model_seed: Option<u64>,
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    /// Three anchor vectors (config only); final embeddings of three random
    /// prompts when omitted.
    #[arg(skip)]
    pub anchors: Option<Vec<Vec<f64>>>,
    /// Longest random prompt used for sampled anchors.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Grid cells per side.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// SVG pixels per grid cell.
    #[arg(long)]
    pub pixel: Option<usize>,
}

overlay!(PlanecutArgs { preset, model_seed, model_file, anchors, max_len, resolution, pixel });

#[derive(Debug, Serialize)]
struct Resolved {
    model: ModelSpec,
    anchors: Vec<Vec<f64>>,
    resolution: usize,
    pixel: usize,
}

#[derive(Debug, Serialize)]
struct CutResult {
    origin: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    extent: (f64, f64, f64, f64),
    anchors: Vec<(f64, f64)>,
    /// `(token, cells)` for every token present, by token id.
    token_cells: Vec<(usize, usize)>,
}

pub fn run(ctx: &Context, a: PlanecutArgs) -> CliResult<String> {
    let (model, spec) = toy_model(ctx, "planecut", a.preset.as_deref(), a.model_file.as_deref(), a.model_seed, "cram")?;
    let anchors = match a.anchors {
        Some(v) if v.len() == 3 => v,
        Some(v) => return invalid(format!("`anchors` needs exactly 3 vectors, got {}", v.len())),
        None => sample_embeddings(&model, 3, a.max_len.unwrap_or(8), ctx.require_seed("planecut")?)?.vectors,
    };
    let resolved = Resolved { model: spec, anchors, resolution: a.resolution.unwrap_or(64), pixel: a.pixel.unwrap_or(6) };
    let arr: [Vec<f64>; 3] = resolved.anchors.clone().try_into().expect("three anchors");
    let cut = plane_cut_map(&model, &arr, resolved.resolution)?;
    let mut counts = vec![0usize; model.config().vocab];
    cut.grid.iter().flatten().for_each(|&t| counts[t] += 1);
    let token_cells: Vec<(usize, usize)> = counts.iter().copied().enumerate().filter(|c| c.1 > 0).collect();
    let res = CutResult { origin: cut.origin.clone(), u: cut.u.clone(), v: cut.v.clone(), extent: cut.extent, anchors: cut.anchors.clone(), token_cells };

    let mut out = Output::new(&ctx.out_dir, &ctx.emit, "planecut", ctx.seed, &resolved)?;
    out.csv("planecut.csv", &cut.to_csv())?;
    out.json("planecut.json", &res)?;
    out.svg("planecut.svg", &cut.to_svg(resolved.pixel));
    let mut s = format!("{} regions on a {}x{} grid\n", res.token_cells.len(), resolved.resolution, resolved.resolution);
    for (t, c) in &res.token_cells {
        s.push_str(&format!("token {t} cells {c}\n"));
    }
    Ok(s + &out.footer())
}
