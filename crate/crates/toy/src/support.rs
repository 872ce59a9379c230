//! Monte-Carlo estimates of where a model's final embeddings live.
//!
//! Random token prompts are pushed through the model and the last column of
//! the last layer is recorded. The enclosing ball, cone and box of those
//! vectors feed the slope bounds of `accessbound_core::bounds`.

use crate::toymodel::{Input, ToyTransformer};
use crate::{Error, Result};
use accessbound_core::bounds::{slope_ball, slope_cone, slope_ellipsoid, FracConeForm, ModelGeometry, PrecisionModel};
use accessbound_core::geometry::{Norm, SupportGeometry};
use accessbound_core::seed;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Pairwise cosine scans switch to random pairs above this many pairs.
pub const MAX_EXACT_PAIRS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    ToyModel,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LengthMode {
    /// Each prompt length is drawn uniformly from `1..=max_len`.
    #[default]
    UpTo,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSample {
    pub vectors: Vec<Vec<f64>>,
    pub source: SampleSource,
    pub max_len: usize,
    pub seed: u64,
}

impl EmbeddingSample {
    pub fn external(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let s = EmbeddingSample { vectors, source: SampleSource::External, max_len: 0, seed: 0 };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<usize> {
        let d = self.vectors.first().ok_or_else(|| Error::Domain("embedding sample is empty".into()))?.len();
        if self.vectors.iter().any(|v| v.len() != d) {
            return Err(Error::Mismatch("embedding vectors differ in dimension".into()));
        }
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

pub fn sample_embeddings(model: &ToyTransformer, count: usize, max_len: usize, seed: u64) -> Result<EmbeddingSample> {
    sample_embeddings_with(model, count, max_len, LengthMode::UpTo, seed)
}

/// Draws `count` prompts of i.i.d. uniform tokens and records `L(X)[:, -1]`
/// for each. Sample `k` uses its own stream, so the result does not depend
/// on thread scheduling.
pub fn sample_embeddings_with(model: &ToyTransformer, count: usize, max_len: usize, mode: LengthMode, seed: u64) -> Result<EmbeddingSample> {
    if count == 0 || max_len == 0 {
        return Err(Error::Domain("need at least one sample and max_len >= 1".into()));
    }
    let vocab = model.config().vocab;
    let vectors = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::rng(seed, k as u64);
            let len = match mode {
                LengthMode::UpTo => rng.gen_range(1..=max_len),
                LengthMode::Fixed => max_len,
            };
            let toks = (0..len).map(|_| rng.gen_range(0..vocab)).collect();
            Ok(model.forward(&Input::tokens(toks))?.last)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EmbeddingSample { vectors, source: SampleSource::ToyModel, max_len, seed })
}

/// `r = max_k ‖Y_k‖∞`.
pub fn estimate_ball(sample: &EmbeddingSample) -> Result<f64> {
    sample.check()?;
    Ok(sample.vectors.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeEstimate {
    /// `arccos` of the smallest pairwise cosine similarity.
    pub angle: f64,
    pub pairs_checked: u64,
    /// Only a random subset of pairs was scanned, so `angle` can only
    /// underestimate the true opening angle.
    pub subsampled: bool,
}

pub fn estimate_cone(sample: &EmbeddingSample) -> Result<ConeEstimate> {
    estimate_cone_with(sample, MAX_EXACT_PAIRS, sample.seed)
}

/// As [`estimate_cone`] with an explicit pair budget and subsampling seed.
pub fn estimate_cone_with(sample: &EmbeddingSample, max_pairs: u64, seed: u64) -> Result<ConeEstimate> {
    sample.check()?;
    let unit: Vec<Vec<f64>> = sample
        .vectors
        .iter()
        .filter_map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            (n > 0.0).then(|| v.iter().map(|x| x / n).collect())
        })
        .collect();
    let n = unit.len() as u64;
    if n < 2 {
        return Err(Error::Degenerate("cone estimate needs at least two nonzero vectors".into()));
    }
    let cos = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let total = n * (n - 1) / 2;
    let (c_min, pairs, subsampled) = if total <= max_pairs {
        let c = (0..unit.len())
            .into_par_iter()
            .map(|i| unit[i + 1..].iter().fold(f64::INFINITY, |m, b| m.min(cos(&unit[i], b))))
            .reduce(|| f64::INFINITY, f64::min);
        (c, total, false)
    } else {
        let shards = 16u64;
        let per = max_pairs.div_ceil(shards);
        let c = (0..shards)
            .into_par_iter()
            .map(|s| {
                let mut rng = seed::rng(seed, s);
                let mut m = f64::INFINITY;
                for _ in 0..per {
                    let i = rng.gen_range(0..unit.len());
                    let mut j = rng.gen_range(0..unit.len() - 1);
                    if j >= i {
                        j += 1;
                    }
                    m = m.min(cos(&unit[i], &unit[j]));
                }
                m
            })
            .reduce(|| f64::INFINITY, f64::min);
        (c, per * shards, true)
    };
    Ok(ConeEstimate { angle: c_min.clamp(-1.0, 1.0).acos(), pairs_checked: pairs, subsampled })
}

/// Coordinatewise `(mins, maxs)`.
pub fn estimate_box(sample: &EmbeddingSample) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = sample.check()?;
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for v in &sample.vectors {
        for j in 0..d {
            mins[j] = mins[j].min(v[j]);
            maxs[j] = maxs[j].max(v[j]);
        }
    }
    Ok((mins, maxs))
}

/// Support estimates and the slope bounds they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub max_len: usize,
    pub samples: usize,
    pub radius: f64,
    pub angle: f64,
    pub angle_subsampled: bool,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    pub slope_ball: f64,
    pub slope_cone: f64,
    pub slope_ellipsoid: f64,
}

/// Slope bounds for a sample of embeddings under `precision`.
pub fn support_report(sample: &EmbeddingSample, vocab: u64, precision: PrecisionModel) -> Result<SupportReport> {
    let d = sample.check()?;
    let radius = estimate_ball(sample)?;
    let cone = estimate_cone(sample)?;
    let (mins, maxs) = estimate_box(sample)?;
    let geom = |support| ModelGeometry { dim: d, vocab_size: vocab, support, precision, prompt_len: None, q: None };
    // a degenerate sample (all zero) still yields a valid, if tiny, support
    let r = radius.max(f64::MIN_POSITIVE);
    let ball = slope_ball(&geom(SupportGeometry::ball(d, r, Norm::Linf)?))?.slope;
    let cone_slope = slope_cone(&geom(SupportGeometry::cone(d, r, cone.angle.max(1e-12))?), FracConeForm::Ratio)?.slope;
    let ell = slope_ellipsoid(&geom(SupportGeometry::boxed(mins.clone(), maxs.clone())?))?.slope;
    Ok(SupportReport {
        max_len: sample.max_len,
        samples: sample.vectors.len(),
        radius,
        angle: cone.angle,
        angle_subsampled: cone.subsampled,
        mins,
        maxs,
        slope_ball: ball,
        slope_cone: cone_slope,
        slope_ellipsoid: ell,
    })
}

/// One [`SupportReport`] per maximal prompt length.
pub fn stability_curve(model: &ToyTransformer, lengths: &[usize], count: usize, precision: PrecisionModel, seed: u64) -> Result<Vec<SupportReport>> {
    lengths
        .iter()
        .map(|&l| support_report(&sample_embeddings(model, count, l, seed)?, model.config().vocab as u64, precision))
        .collect()
}

/// Long-format CSV: `max_len,shape,parameter,slope`.
pub fn stability_csv(rows: &[SupportReport]) -> String {
    let mut s = String::from("max_len,shape,parameter,slope\n");
    for r in rows {
        writeln!(s, "{},ball,{},{}", r.max_len, r.radius, r.slope_ball).unwrap();
        writeln!(s, "{},cone,{},{}", r.max_len, r.angle, r.slope_cone).unwrap();
        let width = r.mins.iter().zip(&r.maxs).map(|(a, b)| b - a).fold(0.0f64, f64::max);
        writeln!(s, "{},ellipsoid,{},{}", r.max_len, width, r.slope_ellipsoid).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toymodel::{InitScales, ToyConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn model() -> ToyTransformer {
        ToyTransformer::random(ToyConfig::new(16, 8, 1, 2), &InitScales::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn hand_computed_estimates() {
        let s = EmbeddingSample::external(vec![vec![1.0, -3.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(estimate_ball(&s).unwrap(), 3.0);
        let s = EmbeddingSample::external(vec![vec![0.0, 5.0], vec![2.0, 1.0]]).unwrap();
        let (lo, hi) = estimate_box(&s).unwrap();
        assert_eq!((hi[0] - lo[0], hi[1] - lo[1]), (2.0, 4.0));
        let s = EmbeddingSample::external(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((estimate_cone(&s).unwrap().angle - FRAC_PI_2).abs() < 1e-15);
        let s = EmbeddingSample::external(vec![vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(estimate_cone(&s).unwrap().angle < 1e-7);
        let s = EmbeddingSample::external(vec![vec![0.0, 0.0]; 3]).unwrap();
        assert_eq!(estimate_ball(&s).unwrap(), 0.0);
        assert!(estimate_cone(&s).is_err());
        assert!(EmbeddingSample::external(vec![]).is_err());
    }

    #[test]
    fn single_token_sample_is_a_forward_pass() {
        let m = model();
        let s = sample_embeddings(&m, 1, 1, 9).unwrap();
        // replay the sample's stream: length draw first, then the token
        let mut rng = seed::rng(9, 0);
        let _len: usize = rng.gen_range(1..=1);
        let t = rng.gen_range(0..16);
        assert_eq!(s.vectors[0], m.forward(&Input::tokens(vec![t])).unwrap().last);
        assert_eq!(s, sample_embeddings(&m, 1, 1, 9).unwrap());
    }

    #[test]
    fn estimates_grow_with_sample_and_box_contains_all() {
        let m = model();
        let small = sample_embeddings(&m, 200, 6, 4).unwrap();
        let big = sample_embeddings(&m, 400, 6, 4).unwrap();
        // per-sample streams make the small sample a prefix of the big one
        assert_eq!(small.vectors[..], big.vectors[..200]);
        assert!(estimate_ball(&big).unwrap() >= estimate_ball(&small).unwrap());
        assert!(estimate_cone(&big).unwrap().angle >= estimate_cone(&small).unwrap().angle);
        let (lo, hi) = estimate_box(&big).unwrap();
        let r = estimate_ball(&big).unwrap();
        for v in &big.vectors {
            for j in 0..v.len() {
                assert!(lo[j] <= v[j] && v[j] <= hi[j]);
                assert!(r >= 0.5 * (hi[j] - lo[j]));
            }
        }
        let mut rev = big.clone();
        rev.vectors.reverse();
        assert_eq!(estimate_cone(&rev).unwrap().angle, estimate_cone(&big).unwrap().angle);
    }

    #[test]
    fn subsampled_cone_never_exceeds_exact() {
        let m = model();
        let s = sample_embeddings(&m, 300, 4, 2).unwrap();
        let exact = estimate_cone(&s).unwrap();
        let sub = estimate_cone_with(&s, 1000, 5).unwrap();
        assert!(sub.subsampled && !exact.subsampled);
        assert!(sub.angle <= exact.angle);
    }

    #[test]
    fn stability_rows_and_shape_ordering() {
        let m = model();
        let p = PrecisionModel::FloatScaled { significand_bits: 11 };
        let rows = stability_curve(&m, &[4], 200, p, 3).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].slope_ellipsoid <= rows[0].slope_ball);
        assert_eq!(stability_csv(&rows).lines().count(), 4);
    }
}
