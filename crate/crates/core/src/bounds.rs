//! Precision models, quantization, and the accessibility counts, thresholds
//! and slopes derived from packing numbers.

use crate::geometry::{
    self, log_log_meanfield_base, packing_wasserstein_upper, volume_ball, volume_cone, MeanFieldConvention, Norm,
    Shape, SupportGeometry,
};
use crate::{Error, LogCount, Result};
use serde::{Deserialize, Serialize};

/// Resolution below which two inputs are indistinguishable to the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrecisionModel {
    Uniform { epsilon: f64 },
    /// Floating point with `significand_bits` bits of significand, counting
    /// the implicit leading bit (11 for fp16, 8 for bf16).
    FloatScaled { significand_bits: u32 },
}

impl PrecisionModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PrecisionModel::Uniform { epsilon } if !(epsilon > 0.0) || !epsilon.is_finite() => {
                Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")))
            }
            PrecisionModel::FloatScaled { significand_bits } if !(2..=52).contains(&significand_bits) => Err(
                Error::Domain(format!("significand bits must lie in [2, 52], got {significand_bits}")),
            ),
            _ => Ok(()),
        }
    }

    /// Gap between 1 and the next representable value: `2^{-(p-1)}`.
    pub fn machine_epsilon(&self) -> f64 {
        match *self {
            PrecisionModel::Uniform { epsilon } => epsilon,
            PrecisionModel::FloatScaled { significand_bits } => 2f64.powi(-(significand_bits as i32 - 1)),
        }
    }
}

pub fn machine_epsilon(model: PrecisionModel) -> f64 {
    model.machine_epsilon()
}

/// Everything the counting bounds need to know about a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGeometry {
    pub dim: usize,
    pub vocab_size: u64,
    pub support: SupportGeometry,
    pub precision: PrecisionModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl ModelGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Domain(format!("vocab_size must be >= 2, got {}", self.vocab_size)));
        }
        if self.support.dim != self.dim {
            return Err(Error::Mismatch(format!(
                "support dimension {} differs from model dimension {}",
                self.support.dim, self.dim
            )));
        }
        if self.prompt_len == Some(0) {
            return Err(Error::Domain("prompt_len must be >= 1".into()));
        }
        if let Some(q) = self.q {
            if !(q >= 1.0) {
                return Err(Error::Domain(format!("q must be >= 1, got {q}")));
            }
        }
        self.support.validate()?;
        self.precision.validate()
    }

    pub fn epsilon(&self) -> f64 {
        self.precision.machine_epsilon()
    }

    pub fn ln_vocab(&self) -> f64 {
        (self.vocab_size as f64).ln()
    }

    fn ball_radius(&self) -> Result<f64> {
        match self.support.shape {
            Shape::Ball { radius, .. } => Ok(radius),
            _ => Err(Error::UnsupportedShape("this bound needs a ball support; use the slope for cones and boxes".into())),
        }
    }

    fn prompt_len(&self) -> Result<usize> {
        self.prompt_len.ok_or_else(|| Error::Domain("prompt_len is required for finite-prompt bounds".into()))
    }

    fn q(&self) -> Result<f64> {
        self.q.ok_or_else(|| Error::Domain("q is required for mean-field bounds".into()))
    }
}

/// `ε ⌊x / ε⌋`, corrected so that grid points map to themselves exactly.
pub fn quantize_value(x: f64, epsilon: f64) -> f64 {
    let mut k = (x / epsilon).floor();
    // x / ε can round across an integer in either direction
    if (k + 1.0) * epsilon <= x {
        k += 1.0;
    } else if k * epsilon > x {
        k -= 1.0;
    }
    k * epsilon
}

/// Quantize every entry of a (flattened) matrix to the `ε` grid.
pub fn quantize(values: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(values.iter().map(|&x| quantize_value(x, epsilon)).collect())
}

/// `ln(1 + 2r/ε)`: log packing number of a radius-`r` interval.
fn ln_packing_1d(radius: f64, epsilon: f64) -> f64 {
    (2.0 * radius / epsilon).ln_1p()
}

/// Number of distinct inputs a length-`m` prompt can take:
/// `ln count = d m ln(1 + 2r/ε)`.
pub fn count_finite(geom: &ModelGeometry) -> Result<LogCount> {
    geom.validate()?;
    let r = geom.ball_radius()?;
    let m = geom.prompt_len()?;
    Ok(LogCount::from_ln((geom.dim * m) as f64 * ln_packing_1d(r, geom.epsilon())))
}

/// Length above which some sequences are inaccessible:
/// `m d ln(1 + 2r/ε) / ln |V|`.
pub fn threshold_finite(geom: &ModelGeometry) -> Result<f64> {
    Ok(count_finite(geom)?.ln() / geom.ln_vocab())
}

/// Log of the largest fraction of length-`n` sequences that can be
/// accessible: `d m ln(1 + 2r/ε) - n ln |V|`. Negative once `n` passes the
/// threshold, and falls by `ln |V|` per extra token.
pub fn decay_log_fraction(geom: &ModelGeometry, n: u64) -> Result<f64> {
    Ok(count_finite(geom)?.ln() - n as f64 * geom.ln_vocab())
}

/// Support shape a slope was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeShape {
    Ball,
    Cone,
    Ellipsoid,
}

/// Upper bound on `C` in `n*(m) = C m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeBound {
    pub slope: f64,
    pub shape: SlopeShape,
    /// Log packing number of one prompt vector's support.
    pub log_packing: f64,
}

impl SlopeBound {
    fn new(log_packing: f64, shape: SlopeShape, ln_vocab: f64) -> Self {
        Self { slope: log_packing / ln_vocab, shape, log_packing }
    }
}

/// `C <= d ln(1 + 2r/ε) / ln |V|`.
pub fn slope_ball(geom: &ModelGeometry) -> Result<SlopeBound> {
    geom.validate()?;
    let r = geom.ball_radius()?;
    let lp = geom.dim as f64 * ln_packing_1d(r, geom.epsilon());
    Ok(SlopeBound::new(lp, SlopeShape::Ball, geom.ln_vocab()))
}

/// How the cone-to-ball packing ratio is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FracConeForm {
    /// Dimensionless `|C_{θ,r}| / |B_2^d(0,r)|`.
    #[default]
    Ratio,
    /// The ratio divided by `r`, as the prefactor is sometimes printed.
    /// Not scale invariant; kept for comparison only.
    Printed,
}

/// `ln FracCone(θ; d)`.
pub fn log_frac_cone(dim: usize, radius: f64, angle: f64, form: FracConeForm) -> Result<f64> {
    let ratio = volume_cone(dim, radius, angle)? - volume_ball(dim, radius, Norm::L2)?;
    Ok(match form {
        FracConeForm::Ratio => ratio,
        FracConeForm::Printed => ratio - radius.ln(),
    })
}

/// `C <= (d ln(1 + 2r/ε) + ln FracCone(θ; d)) / ln |V|`.
pub fn slope_cone(geom: &ModelGeometry, form: FracConeForm) -> Result<SlopeBound> {
    geom.validate()?;
    let Shape::Cone { radius, angle } = geom.support.shape else {
        return Err(Error::UnsupportedShape("slope_cone needs a cone support".into()));
    };
    let lp = geom.dim as f64 * ln_packing_1d(radius, geom.epsilon()) + log_frac_cone(geom.dim, radius, angle, form)?;
    Ok(SlopeBound::new(lp, SlopeShape::Cone, geom.ln_vocab()))
}

/// `C <= Σ_i ln(1 + (max_i - min_i)/ε) / ln |V|` for a box enclosure.
pub fn slope_ellipsoid(geom: &ModelGeometry) -> Result<SlopeBound> {
    geom.validate()?;
    let Shape::Box { mins, maxs } = &geom.support.shape else {
        return Err(Error::UnsupportedShape("slope_ellipsoid needs a box support".into()));
    };
    let eps = geom.epsilon();
    let lp: f64 = mins.iter().zip(maxs).map(|(lo, hi)| ((hi - lo) / eps).ln_1p()).sum();
    Ok(SlopeBound::new(lp, SlopeShape::Ellipsoid, geom.ln_vocab()))
}

/// Binade offset of the half-precision grid: spacing `2^{j - 12}` on `[2^j, 2^{j+1})`.
pub const HALF_PRECISION_GRID_SHIFT: i32 = 12;

/// Packing bound for `[r_min, r_max]` when the resolution grows with magnitude:
/// `2^{12}(b - a) + 2^{13-b} r_max - 2^{13-a} r_min`, with
/// `a = ⌈log2 r_min⌉` and `b = ⌈log2 r_max⌉`.
pub fn variable_precision_packing_interval(r_min: f64, r_max: f64) -> Result<f64> {
    variable_precision_packing_interval_shift(r_min, r_max, HALF_PRECISION_GRID_SHIFT)
}

/// As [`variable_precision_packing_interval`] with grid spacing `2^{j - k}`.
pub fn variable_precision_packing_interval_shift(r_min: f64, r_max: f64, k: i32) -> Result<f64> {
    if !(r_min > 0.0) || !(r_max >= r_min) || !r_max.is_finite() {
        return Err(Error::Domain(format!("need 0 < r_min <= r_max, got [{r_min}, {r_max}]")));
    }
    let a = r_min.log2().ceil() as i32;
    let b = r_max.log2().ceil() as i32;
    let two = |e: i32| 2f64.powi(e);
    Ok(two(k) * f64::from(b - a) + two(k + 1 - b) * r_max - two(k + 1 - a) * r_min)
}

/// Two-sided support `[-r_max, -r_min] ∪ [r_min, r_max]`: twice the one-sided bound.
pub fn variable_precision_packing_symmetric(r_min: f64, r_max: f64) -> Result<f64> {
    Ok(2.0 * variable_precision_packing_interval(r_min, r_max)?)
}

/// Mean-field count `(e + e(2r)^q/ε^q)^{(1 + k r/ε)^d}` with `k` from the
/// convention (the counting theorem uses `k = 2`).
pub fn count_meanfield(geom: &ModelGeometry, convention: MeanFieldConvention) -> Result<LogCount> {
    geom.validate()?;
    let r = geom.ball_radius()?;
    packing_wasserstein_upper(geom.dim, r, geom.epsilon(), geom.q()?, convention)
}

/// `ln n*` for the mean-field threshold
/// `n* = (1 + k r/ε)^d ln(e + e(2r)^q/ε^q) / ln |V|`; the threshold corollary
/// uses `k = 4`. Independent of the prompt length.
pub fn threshold_meanfield(geom: &ModelGeometry, convention: MeanFieldConvention) -> Result<f64> {
    geom.validate()?;
    let r = geom.ball_radius()?;
    let eps = geom.epsilon();
    let ln_exponent = geom.dim as f64 * (convention.radius_factor() * r / eps).ln_1p();
    Ok(ln_exponent + log_log_meanfield_base(r, eps, geom.q()?)? - geom.ln_vocab().ln())
}

/// Published constants for a pretrained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub name: String,
    pub d: usize,
    pub vocab: u64,
    pub r: f64,
    pub theta: f64,
}

const BUNDLED_CONSTANTS: &str = include_str!("../data/model_constants.json");

/// Dimension, vocabulary, support radius and cone angle of several pretrained
/// model families.
pub fn bundled_constants() -> Vec<ModelConstants> {
    serde_json::from_str(BUNDLED_CONSTANTS).expect("bundled constants are valid JSON")
}

pub fn bundled_model(name: &str) -> Option<ModelConstants> {
    bundled_constants().into_iter().find(|m| m.name.eq_ignore_ascii_case(name))
}

impl ModelConstants {
    /// Ball geometry at half precision, for one prompt vector.
    pub fn ball_geometry(&self) -> Result<ModelGeometry> {
        Ok(ModelGeometry {
            dim: self.d,
            vocab_size: self.vocab,
            support: SupportGeometry::ball(self.d, self.r, Norm::Linf)?,
            precision: PrecisionModel::FloatScaled { significand_bits: 11 },
            prompt_len: Some(1),
            q: None,
        })
    }

    pub fn cone_geometry(&self) -> Result<ModelGeometry> {
        Ok(ModelGeometry { support: SupportGeometry::cone(self.d, self.r, self.theta)?, ..self.ball_geometry()? })
    }
}

/// Convenience for building a ball geometry with a uniform grid.
pub fn uniform_ball(dim: usize, vocab_size: u64, radius: f64, epsilon: f64, prompt_len: Option<usize>) -> Result<ModelGeometry> {
    let g = ModelGeometry {
        dim,
        vocab_size,
        support: geometry::SupportGeometry::ball(dim, radius, Norm::Linf)?,
        precision: PrecisionModel::Uniform { epsilon },
        prompt_len,
        q: None,
    };
    g.validate()?;
    Ok(g)
}
