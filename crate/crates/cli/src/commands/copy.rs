use super::{csv_rows, Context, ModelSpec};
use crate::config::overlay;
use crate::output::Output;
use crate::svg::{Chart, Series};
use crate::{invalid, CliError, CliResult};
use accessbound_core::seed;
use accessbound_toy::experiments::presets::{copy_config, copy_model};
use accessbound_toy::experiments::{copy_eval, copy_finetune, CopyConfig, CopyEval};
use accessbound_toy::toymodel::save;
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CopyArgs {
    #[arg(long)]
    pub model_seed: Option<u64>,
    /// Longest training string.
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Lengths evaluated after training (default `1..=32`).
    #[arg(long, value_delimiter = ',')]
    pub eval_lengths: Option<Vec<usize>>,
    /// Random strings per evaluated length.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Also write the trained model here.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
}

overlay!(CopyArgs { model_seed, max_len, batch, lr, max_steps, eval_every, eval_lengths, trials, save_model });

#[derive(Debug, Serialize)]
struct Resolved {
    model: ModelSpec,
    training: CopyConfig,
    eval_lengths: Vec<usize>,
    trials: usize,
}

#[derive(Debug, Serialize)]
struct CopyResult {
    steps: usize,
    converged: bool,
    final_loss: Option<f64>,
    /// Exact match at the longest training length during training.
    training_evals: Vec<(usize, f64)>,
    eval: CopyEval,
}

pub fn run(ctx: &Context, a: CopyArgs) -> CliResult<String> {
    let seed = ctx.require_seed("copy")?;
    let model_seed = a.model_seed.unwrap_or(seed);
    let mut training = copy_config(seed::derive(seed, 1));
    if let Some(v) = a.max_len {
        training.max_len = v;
    }
    if let Some(v) = a.batch {
        training.batch = v;
    }
    if let Some(v) = a.lr {
        training.adam.lr = v;
    }
    if let Some(v) = a.max_steps {
        training.max_steps = v;
    }
    if let Some(v) = a.eval_every {
        training.eval_every = v;
    }
    let eval_lengths = a.eval_lengths.unwrap_or_else(|| (1..=32).collect());
    if eval_lengths.is_empty() {
        return invalid("eval_lengths must not be empty");
    }
    let resolved = Resolved {
        model: ModelSpec::Preset { name: "copy".into(), model_seed },
        training,
        eval_lengths,
        trials: a.trials.unwrap_or(64),
    };
    let (model, log) = copy_finetune(copy_model(model_seed)?, &resolved.training)?;
    if let Some(path) = &a.save_model {
        save(&model, Some(model_seed), path).map_err(|e| CliError::Internal(format!("cannot save model: {e}")))?;
    }
    let eval = copy_eval(&model, &resolved.eval_lengths, resolved.trials, seed::derive(seed, 2))?;
    let res = CopyResult { steps: log.steps, converged: log.converged, final_loss: log.losses.last().copied(), training_evals: log.evals, eval };

    let mut out = Output::new(&ctx.out_dir, &ctx.emit, "copy", ctx.seed, &resolved)?;
    out.csv("copy_eval.csv", &res.eval.to_csv())?;
    out.csv("copy_loss.csv", &csv_rows("step,loss", log.losses.iter().enumerate().map(|(i, l)| vec![(i + 1).to_string(), l.to_string()])))?;
    out.json("copy.json", &res)?;
    let pts: Vec<(f64, f64)> = res.eval.lengths.iter().zip(&res.eval.accuracy).map(|(&n, &acc)| (n as f64, acc)).collect();
    let mut series = vec![Series::markers("exact match", pts, 0)];
    if let Some(f) = res.eval.fit {
        let (lo, hi) = (resolved.eval_lengths[0] as f64, *resolved.eval_lengths.last().unwrap() as f64);
        series.push(Series::line("sigmoid fit", (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).map(|n| (n, f.eval(n))).collect(), 0));
    }
    series.push(Series::line("trained length", vec![(training.max_len as f64, 0.0), (training.max_len as f64, 1.0)], 7).dashed());
    let chart = Chart {
        title: "Copy accuracy versus string length".into(),
        x_label: "string length".into(),
        y_label: "exact-match accuracy".into(),
        series,
        hline: None,
        y_range: Some((0.0, 1.0)),
    };
    out.svg("copy.svg", &chart.render());

    let mut s = format!("steps {} converged {}\n", res.steps, res.converged);
    for (n, acc) in res.eval.lengths.iter().zip(&res.eval.accuracy) {
        s.push_str(&format!("length {n} accuracy {acc:.3}\n"));
    }
    if let Some(f) = res.eval.fit {
        s.push_str(&format!("fit r2 {:.4}\n", f.r2));
    }
    if let Some(t) = res.eval.transition_length {
        s.push_str(&format!("transition length {t:.3}\n"));
    }
    Ok(s + &out.footer())
}
