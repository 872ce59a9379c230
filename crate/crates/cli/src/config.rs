use crate::commands::{bounds::BoundsArgs, cellvol::CellvolArgs, copy::CopyArgs, cram::CramArgs, eo::EoArgs};
use crate::commands::{planecut::PlanecutArgs, report::ReportArgs, support::SupportArgs};
use crate::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Csv,
    Json,
    Svg,
}

impl Emit {
    pub const ALL: [Emit; 3] = [Emit::Csv, Emit::Json, Emit::Svg];
}

/// Contents of a `--config` file. Each subcommand reads its own block and
/// ignores the others.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub emit: Option<Vec<Emit>>,
    pub jobs: Option<usize>,
    pub bounds: BoundsArgs,
    pub support: SupportArgs,
    pub cellvol: CellvolArgs,
    pub cram: CramArgs,
    pub copy: CopyArgs,
    pub planecut: PlanecutArgs,
    pub eo: EoArgs,
    pub report: ReportArgs,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("malformed config {}: {e}", path.display())))
    }
}

/// Implements `overlay(self, file) -> Self` for an argument block whose
/// fields are all `Option`s: a field set on the command line wins.
macro_rules! overlay {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $ty {
            pub fn overlay(self, file: Self) -> Self {
                Self { $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}
pub(crate) use overlay;

/// Value of a required field, or a validation error naming it.
pub(crate) fn required<T>(value: Option<T>, field: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Validation(format!("missing required field `{field}`")))
}
