use super::{csv_rows, opt, precision, Context};
use crate::config::{overlay, required};
use crate::output::Output;
use crate::{invalid, CliResult};
use accessbound_core::bounds::{
    bundled_constants, bundled_model, count_finite, count_meanfield, slope_ball, slope_cone, threshold_finite,
    threshold_meanfield, FracConeForm, ModelGeometry, PrecisionModel,
};
use accessbound_core::geometry::{MeanFieldConvention, Norm, SupportGeometry};
use clap::Args;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsArgs {
    /// Bundled model constants, e.g. `pythia-160m`; other flags override them.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, alias = "vocab")]
    pub vocab_size: Option<u64>,
    /// Sup-norm radius of the embedding support.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Full opening angle of a cone support, in radians.
    #[arg(long)]
    pub angle: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub significand_bits: Option<u32>,
    /// Prompt length for the finite-prompt count and threshold (default 1).
    #[arg(long)]
    pub prompt_len: Option<usize>,
    /// Wasserstein order for the mean-field bounds; omitted means skipped.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, value_enum)]
    pub convention: Option<Convention>,
    #[arg(long, value_enum)]
    pub frac_cone: Option<FracForm>,
    /// List the bundled models and exit.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub list_models: Option<bool>,
}

overlay!(BoundsArgs { model, dim, vocab_size, radius, angle, epsilon, significand_bits, prompt_len, q, convention, frac_cone, list_models });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Theorem,
    Corollary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FracForm {
    Ratio,
    Printed,
}

#[derive(Debug, Serialize)]
struct Resolved {
    model: Option<String>,
    dim: usize,
    vocab_size: u64,
    radius: f64,
    angle: Option<f64>,
    precision: PrecisionModel,
    prompt_len: usize,
    q: Option<f64>,
    convention: MeanFieldConvention,
    frac_cone: FracConeForm,
}

#[derive(Debug, Serialize)]
struct BoundsResult {
    epsilon: f64,
    slope_ball: f64,
    log_packing_ball: f64,
    slope_cone: Option<f64>,
    log_packing_cone: Option<f64>,
    threshold_finite: f64,
    log10_count_finite: f64,
    log10_log10_count_meanfield: Option<f64>,
    ln_threshold_meanfield: Option<f64>,
}

fn resolve(a: BoundsArgs) -> CliResult<Resolved> {
    let base = match &a.model {
        Some(name) => match bundled_model(name) {
            Some(c) => Some(c),
            None => {
                let names: Vec<String> = bundled_constants().into_iter().map(|c| c.name).collect();
                return invalid(format!("unknown model `{name}`; bundled: {}", names.join(", ")));
            }
        },
        None => None,
    };
    Ok(Resolved {
        model: base.as_ref().map(|c| c.name.clone()),
        dim: required(a.dim.or(base.as_ref().map(|c| c.d)), "dim")?,
        vocab_size: required(a.vocab_size.or(base.as_ref().map(|c| c.vocab)), "vocab_size")?,
        radius: required(a.radius.or(base.as_ref().map(|c| c.r)), "radius")?,
        angle: a.angle.or(base.as_ref().map(|c| c.theta)),
        precision: precision(a.epsilon, a.significand_bits)?,
        prompt_len: a.prompt_len.unwrap_or(1),
        q: a.q,
        convention: match a.convention {
            Some(Convention::Corollary) => MeanFieldConvention::Corollary,
            _ => MeanFieldConvention::Theorem,
        },
        frac_cone: match a.frac_cone {
            Some(FracForm::Printed) => FracConeForm::Printed,
            _ => FracConeForm::Ratio,
        },
    })
}

pub fn run(ctx: &Context, args: BoundsArgs) -> CliResult<String> {
    if args.list_models == Some(true) {
        let mut s = String::from("name d vocab r theta\n");
        for c in bundled_constants() {
            s.push_str(&format!("{} {} {} {} {}\n", c.name, c.d, c.vocab, c.r, c.theta));
        }
        return Ok(s);
    }
    let r = resolve(args)?;
    let geom = ModelGeometry {
        dim: r.dim,
        vocab_size: r.vocab_size,
        support: SupportGeometry::ball(r.dim, r.radius, Norm::Linf)?,
        precision: r.precision,
        prompt_len: Some(r.prompt_len),
        q: r.q,
    };
    let ball = slope_ball(&geom)?;
    let cone = match r.angle {
        Some(angle) => Some(slope_cone(&ModelGeometry { support: SupportGeometry::cone(r.dim, r.radius, angle)?, ..geom.clone() }, r.frac_cone)?),
        None => None,
    };
    let (mf_count, mf_threshold) = match r.q {
        Some(_) => (Some(count_meanfield(&geom, r.convention)?.log10_log10()), Some(threshold_meanfield(&geom, r.convention)?)),
        None => (None, None),
    };
    let res = BoundsResult {
        epsilon: geom.epsilon(),
        slope_ball: ball.slope,
        log_packing_ball: ball.log_packing,
        slope_cone: cone.map(|c| c.slope),
        log_packing_cone: cone.map(|c| c.log_packing),
        threshold_finite: threshold_finite(&geom)?,
        log10_count_finite: count_finite(&geom)?.log10(),
        log10_log10_count_meanfield: mf_count,
        ln_threshold_meanfield: mf_threshold,
    };

    let rows = [
        ("slope_ball", Some(res.slope_ball)),
        ("slope_cone", res.slope_cone),
        ("threshold_finite", Some(res.threshold_finite)),
        ("log10_count_finite", Some(res.log10_count_finite)),
        ("log10_log10_count_meanfield", res.log10_log10_count_meanfield),
        ("ln_threshold_meanfield", res.ln_threshold_meanfield),
    ];
    let mut out = Output::new(&ctx.out_dir, &ctx.emit, "bounds", None, &r)?;
    out.csv("bounds.csv", &csv_rows("quantity,value", rows.iter().map(|(k, v)| vec![k.to_string(), opt(*v)])))?;
    out.json("bounds.json", &res)?;

    let mut s = String::new();
    if let Some(m) = &r.model {
        s.push_str(&format!("model {m}\n"));
    }
    s.push_str(&format!("d {} |V| {} r {} eps {}\n", r.dim, r.vocab_size, r.radius, res.epsilon));
    for (k, v) in rows {
        if let Some(v) = v {
            s.push_str(&format!("{k} {v:.4}\n"));
        }
    }
    Ok(s + &out.footer())
}
