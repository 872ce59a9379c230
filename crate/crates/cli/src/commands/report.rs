use super::{csv_rows, opt, Context};
use crate::config::overlay;
use crate::output::{read_result, Output};
use crate::{invalid, CliError, CliResult};
use accessbound_toy::experiments::CramStudy;
use accessbound_toy::support::SupportReport;
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportArgs {
    /// Directory holding earlier outputs (default: the output directory).
    #[arg(long)]
    pub input: Option<PathBuf>,
}

overlay!(ReportArgs { input });

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub source: String,
    pub shape: String,
    pub theoretical_slope: f64,
    pub empirical_slope: Option<f64>,
    /// `theoretical / empirical`; above 1 when theory bounds practice.
    pub ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Resolved {
    /// Config hashes of the merged outputs, by file name.
    inputs: Inputs,
}

fn parse<T: serde::de::DeserializeOwned>(v: Value, path: &Path) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| CliError::Validation(format!("unexpected contents in {}: {e}", path.display())))
}

fn input_hash(path: &Path) -> CliResult<String> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("malformed {}: {e}", path.display())))?;
    Ok(doc.get("config_hash").and_then(Value::as_str).unwrap_or("").to_string())
}

/// `(file name, config hash)` of each merged input.
type Inputs = Vec<(String, String)>;

/// Builds the summary rows from whichever of `cram.json`, `support.json`
/// and `bounds.json` exist in `dir`.
pub fn collect(dir: &Path) -> CliResult<(Vec<Row>, Inputs)> {
    let mut rows = Vec::new();
    let mut inputs = Vec::new();
    let cram = dir.join("cram.json");
    if cram.exists() {
        let study: CramStudy = parse(read_result(&cram)?, &cram)?;
        let emp = study.line.map(|l| l.slope);
        let sup = &study.support;
        for (shape, theory) in [("ball", sup.slope_ball), ("cone", sup.slope_cone), ("ellipsoid", sup.slope_ellipsoid)] {
            rows.push(Row {
                source: "cram".into(),
                shape: shape.into(),
                theoretical_slope: theory,
                empirical_slope: emp,
                ratio: emp.map(|e| theory / e),
            });
        }
        inputs.push(("cram.json".into(), input_hash(&cram)?));
    }
    let support = dir.join("support.json");
    if support.exists() {
        let reports: Vec<SupportReport> = parse(read_result(&support)?, &support)?;
        for r in &reports {
            for (shape, theory) in [("ball", r.slope_ball), ("cone", r.slope_cone), ("ellipsoid", r.slope_ellipsoid)] {
                rows.push(Row {
                    source: format!("support max_len={}", r.max_len),
                    shape: shape.into(),
                    theoretical_slope: theory,
                    empirical_slope: None,
                    ratio: None,
                });
            }
        }
        inputs.push(("support.json".into(), input_hash(&support)?));
    }
    let bounds = dir.join("bounds.json");
    if bounds.exists() {
        let v = read_result(&bounds)?;
        for (shape, key) in [("ball", "slope_ball"), ("cone", "slope_cone")] {
            if let Some(t) = v.get(key).and_then(Value::as_f64) {
                rows.push(Row { source: "bounds".into(), shape: shape.into(), theoretical_slope: t, empirical_slope: None, ratio: None });
            }
        }
        inputs.push(("bounds.json".into(), input_hash(&bounds)?));
    }
    if rows.is_empty() {
        return invalid(format!("no cram.json, support.json or bounds.json in {}", dir.display()));
    }
    Ok((rows, inputs))
}

pub fn run(ctx: &Context, a: ReportArgs) -> CliResult<String> {
    let dir = a.input.unwrap_or_else(|| ctx.out_dir.clone());
    let (rows, inputs) = collect(&dir)?;
    let mut out = Output::new(&ctx.out_dir, &ctx.emit, "report", None, &Resolved { inputs })?;
    out.csv(
        "report.csv",
        &csv_rows(
            "source,shape,theoretical_slope,empirical_slope,ratio",
            rows.iter().map(|r| vec![r.source.clone(), r.shape.clone(), r.theoretical_slope.to_string(), opt(r.empirical_slope), opt(r.ratio)]),
        ),
    )?;
    out.json("report.json", &rows)?;
    let mut s = format!("{:<22} {:<10} {:>12} {:>12} {:>8}\n", "source", "shape", "theory", "empirical", "ratio");
    for r in &rows {
        let f = |v: Option<f64>, p: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.p$}"));
        s.push_str(&format!(
            "{:<22} {:<10} {:>12.4} {:>12} {:>8}\n",
            r.source,
            r.shape,
            r.theoretical_slope,
            f(r.empirical_slope, 4),
            f(r.ratio, 2)
        ));
    }
    Ok(s + &out.footer())
}
