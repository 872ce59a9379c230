//! Counts stored as a natural log or as a doubly-iterated natural log.

use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_10, LN_2};
use std::fmt;

/// Which logarithm a [`LogCount`] stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// `value = ln(count)`
    Ln,
    /// `value = ln(ln(count))`
    LnLn,
}

/// A positive count too large for `f64`, kept as `ln` or `ln ln`.
///
/// Mean-field counts look like `(e + ...)^{(1 + 2r/eps)^d}`, whose natural
/// log already overflows; those are stored on the [`Scale::LnLn`] scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogCount {
    pub scale: Scale,
    pub value: f64,
}

impl LogCount {
    pub fn from_ln(ln: f64) -> Self {
        Self { scale: Scale::Ln, value: ln }
    }

    pub fn from_ln_ln(ln_ln: f64) -> Self {
        Self { scale: Scale::LnLn, value: ln_ln }
    }

    /// `ln(count)`; `+inf` when the count is only representable as `ln ln`.
    pub fn ln(&self) -> f64 {
        match self.scale {
            Scale::Ln => self.value,
            Scale::LnLn => self.value.exp(),
        }
    }

    /// `ln(ln(count))`; NaN for counts `<= 1` stored on the `Ln` scale.
    pub fn ln_ln(&self) -> f64 {
        match self.scale {
            Scale::Ln => {
                if self.value > 0.0 {
                    self.value.ln()
                } else {
                    f64::NAN
                }
            }
            Scale::LnLn => self.value,
        }
    }

    pub fn log2(&self) -> f64 {
        self.ln() / LN_2
    }

    pub fn log10(&self) -> f64 {
        self.ln() / LN_10
    }

    /// `log10(log10(count))`, finite even when `log10` overflows.
    pub fn log10_log10(&self) -> f64 {
        (self.ln_ln() - LN_10.ln()) / LN_10
    }

    /// `log2(log2(count))`.
    pub fn log2_log2(&self) -> f64 {
        (self.ln_ln() - LN_2.ln()) / LN_2
    }
}

impl fmt::Display for LogCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l10 = self.log10();
        if l10.is_finite() {
            write!(f, "10^{:.6} (2^{:.6})", l10, self.log2())
        } else {
            write!(f, "10^10^{:.6} (2^2^{:.6})", self.log10_log10(), self.log2_log2())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_round_trip() {
        let a = LogCount::from_ln(100.0);
        let b = LogCount::from_ln_ln(100f64.ln());
        assert!((a.ln() - b.ln()).abs() < 1e-12);
        assert!((a.ln_ln() - b.ln_ln()).abs() < 1e-15);
        assert!((a.log10() - 100.0 / LN_10).abs() < 1e-12);
    }

    #[test]
    fn huge_counts_keep_finite_iterated_logs() {
        let c = LogCount::from_ln_ln(5000.0);
        assert!(c.ln().is_infinite());
        assert!(c.log10_log10().is_finite());
        assert!(c.to_string().starts_with("10^10^"));
        // log10 log10 N = (ln ln N - ln ln 10) / ln 10
        assert!((c.log10_log10() - (5000.0 - LN_10.ln()) / LN_10).abs() < 1e-9);
    }

    #[test]
    fn small_count_has_no_iterated_log() {
        assert!(LogCount::from_ln(0.0).ln_ln().is_nan());
    }
}
