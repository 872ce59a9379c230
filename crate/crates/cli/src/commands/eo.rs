use super::{csv_rows, Context};
use crate::config::overlay;
use crate::output::Output;
use crate::CliResult;
use accessbound_core::eo::{basis_radius, log_basis_size, verify_density, BasisVariant, DensityReport, EoParams};
use accessbound_core::Error;
use clap::Args;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VariantArg {
    Coarse,
    Improved,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EoArgs {
    /// Inverse precisions to check.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<u64>>,
    /// Numbers of distinguishable values to check.
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
    #[arg(long)]
    pub max_l1: Option<u64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub variants: Option<Vec<VariantArg>>,
}

overlay!(EoArgs { p, d, max_l1, variants });

#[derive(Debug, Serialize)]
struct Resolved {
    p: Vec<u64>,
    d: Vec<usize>,
    max_l1: u64,
    variants: Vec<BasisVariant>,
}

#[derive(Debug, Serialize)]
struct Row {
    p: u64,
    d: usize,
    variant: BasisVariant,
    /// Why the variant is undefined for these parameters, if it is.
    undefined: Option<String>,
    b: Option<u64>,
    log_basis_size: Option<f64>,
    report: Option<DensityReport>,
}

pub fn run(ctx: &Context, a: EoArgs) -> CliResult<String> {
    let r = Resolved {
        p: a.p.unwrap_or_else(|| vec![1, 2, 3]),
        d: a.d.unwrap_or_else(|| vec![2, 3]),
        max_l1: a.max_l1.unwrap_or(20),
        variants: a
            .variants
            .unwrap_or_else(|| vec![VariantArg::Coarse, VariantArg::Improved])
            .into_iter()
            .map(|v| match v {
                VariantArg::Coarse => BasisVariant::Coarse,
                VariantArg::Improved => BasisVariant::Improved,
            })
            .collect(),
    };
    let mut rows = Vec::new();
    for &p in &r.p {
        for &d in &r.d {
            let params = EoParams::new(p, d)?;
            for &variant in &r.variants {
                let row = match basis_radius(params, variant) {
                    Ok(b) => Row {
                        p,
                        d,
                        variant,
                        undefined: None,
                        b: Some(b),
                        log_basis_size: Some(log_basis_size(params, variant)?),
                        report: Some(verify_density(params, variant, r.max_l1)?),
                    },
                    Err(Error::Degenerate(msg)) => Row { p, d, variant, undefined: Some(msg), b: None, log_basis_size: None, report: None },
                    Err(e) => return Err(e.into()),
                };
                rows.push(row);
            }
        }
    }

    let mut out = Output::new(&ctx.out_dir, &ctx.emit, "eo", None, &r)?;
    let csv = csv_rows(
        "p,d,variant,b,log_basis_size,vectors_checked,distinct_classes,max_ratio_strict,max_ratio_permissive,violations,passed",
        rows.iter().map(|row| {
            let variant = serde_json::to_value(row.variant).unwrap().as_str().unwrap().to_string();
            match &row.report {
                Some(rep) => vec![
                    row.p.to_string(),
                    row.d.to_string(),
                    variant,
                    rep.b.to_string(),
                    row.log_basis_size.unwrap().to_string(),
                    rep.vectors_checked.to_string(),
                    rep.distinct_classes.to_string(),
                    rep.max_ratio_strict.to_string(),
                    rep.max_ratio_permissive.to_string(),
                    (rep.violations_strict.len() + rep.violations_permissive.len()).to_string(),
                    rep.passed().to_string(),
                ],
                None => {
                    let mut v = vec![row.p.to_string(), row.d.to_string(), variant];
                    v.extend(std::iter::repeat_n(String::new(), 7));
                    v.push("undefined".into());
                    v
                }
            }
        }),
    );
    out.csv("eo.csv", &csv)?;
    out.json("eo.json", &rows)?;

    let mut s = String::from("p d variant b passed\n");
    let mut failed = 0;
    for row in &rows {
        let variant = serde_json::to_value(row.variant).unwrap().as_str().unwrap().to_string();
        match &row.report {
            Some(rep) => {
                failed += usize::from(!rep.passed());
                s.push_str(&format!("{} {} {variant} {} {}\n", row.p, row.d, rep.b, rep.passed()));
            }
            None => s.push_str(&format!("{} {} {variant} - undefined\n", row.p, row.d)),
        }
    }
    s.push_str(&format!("{failed} failing combinations\n"));
    Ok(s + &out.footer())
}
