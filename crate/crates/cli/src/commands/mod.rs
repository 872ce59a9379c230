pub mod bounds;
pub mod cellvol;
pub mod copy;
pub mod cram;
pub mod eo;
pub mod planecut;
pub mod report;
pub mod support;

use crate::{invalid, CliError, CliResult, Emit};
use accessbound_core::bounds::PrecisionModel;
use accessbound_toy::experiments::presets;
use accessbound_toy::toymodel::load;
use accessbound_toy::ToyTransformer;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub struct Context {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub emit: Vec<Emit>,
}

impl Context {
    pub fn require_seed(&self, command: &str) -> CliResult<u64> {
        self.seed.ok_or_else(|| CliError::Validation(format!("`{command}` is stochastic; pass --seed or set `seed` in the config")))
    }
}

/// Uniform spacing if `epsilon` is set, else a float grid (fp16 by default).
pub fn precision(epsilon: Option<f64>, significand_bits: Option<u32>) -> CliResult<PrecisionModel> {
    let p = match (epsilon, significand_bits) {
        (Some(_), Some(_)) => return invalid("set at most one of `epsilon` and `significand_bits`"),
        (Some(epsilon), None) => PrecisionModel::Uniform { epsilon },
        (None, bits) => PrecisionModel::FloatScaled { significand_bits: bits.unwrap_or(11) },
    };
    p.validate()?;
    Ok(p)
}

/// Where a toy model came from, as recorded in output metadata.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Preset { name: String, model_seed: u64 },
    /// Content hash rather than path, so moving the file keeps the config hash.
    File { sha256: String },
}

/// Loads `model_file` if given, else builds the named preset (`cram` or
/// `copy`) from `model_seed`, falling back to the run seed.
pub fn toy_model(
    ctx: &Context,
    command: &str,
    preset: Option<&str>,
    model_file: Option<&Path>,
    model_seed: Option<u64>,
    default_preset: &str,
) -> CliResult<(ToyTransformer, ModelSpec)> {
    if let Some(path) = model_file {
        if preset.is_some() || model_seed.is_some() {
            return invalid("`model_file` excludes `preset` and `model_seed`");
        }
        let bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("cannot read model {}: {e}", path.display())))?;
        let (model, _) = load(path)?;
        return Ok((model, ModelSpec::File { sha256: hex::encode(Sha256::digest(&bytes)) }));
    }
    let name = preset.unwrap_or(default_preset);
    let model_seed = match model_seed {
        Some(s) => s,
        None => ctx.require_seed(command)?,
    };
    let model = match name {
        "cram" => presets::cram_model(model_seed)?,
        "copy" => presets::copy_model(model_seed)?,
        other => return invalid(format!("unknown preset `{other}`; expected `cram` or `copy`")),
    };
    Ok((model, ModelSpec::Preset { name: name.to_string(), model_seed }))
}

/// `a,b,c` with a header row; floats use the shortest round-trip form.
pub fn csv_rows(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}
