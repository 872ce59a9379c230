//! Volumes of balls, boxes and truncated cones, and packing-number bounds
//! over these bodies. All volumes and counts are natural logs.

pub mod montecarlo;
pub mod packing;
pub mod special;

use crate::{Error, LogCount, Result};
use serde::{Deserialize, Serialize};
use special::{log_gamma, log_incomplete_beta};
use std::f64::consts::PI;

pub use special::{incomplete_beta, log_beta};

/// Norm defining a ball, a packing separation, or a ground distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L2,
    Linf,
    /// `l_p` with `p >= 1`.
    Lp(f64),
}

impl Norm {
    fn validate(self) -> Result<()> {
        match self {
            Norm::Lp(p) if !(p >= 1.0) => Err(Error::Domain(format!("l_p norm needs p >= 1, got {p}"))),
            _ => Ok(()),
        }
    }

    /// Evaluate the norm of a vector.
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Norm::Lp(p) if p.is_infinite() => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Norm::Lp(p) => v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p),
        }
    }
}

/// Shape of an embedding-support enclosure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ball { radius: f64, norm: Norm },
    /// Cone of full opening angle `angle` around a fixed axis, cut at `radius`.
    Cone { radius: f64, angle: f64 },
    Box { mins: Vec<f64>, maxs: Vec<f64> },
}

/// Enclosure of the region occupied by embeddings, with its dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportGeometry {
    pub dim: usize,
    pub shape: Shape,
}

impl SupportGeometry {
    pub fn ball(dim: usize, radius: f64, norm: Norm) -> Result<Self> {
        let g = Self { dim, shape: Shape::Ball { radius, norm } };
        g.validate()?;
        Ok(g)
    }

    pub fn cone(dim: usize, radius: f64, angle: f64) -> Result<Self> {
        let g = Self { dim, shape: Shape::Cone { radius, angle } };
        g.validate()?;
        Ok(g)
    }

    pub fn boxed(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Self> {
        let g = Self { dim: mins.len(), shape: Shape::Box { mins, maxs } };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Domain("support dimension must be >= 1".into()));
        }
        match &self.shape {
            Shape::Ball { radius, norm } => {
                check_radius(*radius)?;
                norm.validate()
            }
            Shape::Cone { radius, angle } => {
                check_radius(*radius)?;
                check_angle(*angle)
            }
            Shape::Box { mins, maxs } => {
                if mins.len() != self.dim || maxs.len() != self.dim {
                    return Err(Error::Mismatch(format!(
                        "box bounds have lengths {} and {}, expected {}",
                        mins.len(),
                        maxs.len(),
                        self.dim
                    )));
                }
                for (i, (lo, hi)) in mins.iter().zip(maxs).enumerate() {
                    if !(lo < hi) {
                        return Err(Error::Domain(format!("box coordinate {i}: min {lo} must be < max {hi}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Natural log of the enclosure volume.
    pub fn log_volume(&self) -> Result<f64> {
        match &self.shape {
            Shape::Ball { radius, norm } => volume_ball(self.dim, *radius, *norm),
            Shape::Cone { radius, angle } => volume_cone(self.dim, *radius, *angle),
            Shape::Box { mins, maxs } => Ok(mins.iter().zip(maxs).map(|(a, b)| (b - a).ln()).sum()),
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("radius must be positive and finite, got {r}")));
    }
    Ok(())
}

fn check_angle(angle: f64) -> Result<()> {
    if !(angle > 0.0 && angle < PI) {
        return Err(Error::Domain(format!("cone angle must lie in (0, pi), got {angle}")));
    }
    Ok(())
}

/// Lower and upper packing bounds, as natural logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackingBounds {
    pub log_lower: f64,
    pub log_upper: f64,
}

/// `ln Vol(B_p^d(0, r))`.
///
/// `(2r)^d Γ(1 + 1/p)^d / Γ(1 + d/p)`, and exactly `d ln(2r)` for `l_inf`.
pub fn volume_ball(dim: usize, radius: f64, norm: Norm) -> Result<f64> {
    if dim == 0 {
        return Err(Error::Domain("dimension must be >= 1".into()));
    }
    check_radius(radius)?;
    norm.validate()?;
    let d = dim as f64;
    let p = match norm {
        Norm::L2 => 2.0,
        Norm::Linf => return Ok(d * (2.0 * radius).ln()),
        Norm::Lp(p) if p.is_infinite() => return Ok(d * (2.0 * radius).ln()),
        Norm::Lp(p) => p,
    };
    Ok(d * (2.0 * radius).ln() + d * log_gamma(1.0 + 1.0 / p)? - log_gamma(1.0 + d / p)?)
}

/// `ln ω_k`, the log volume of the unit Euclidean ball in `k` dimensions.
pub fn log_unit_ball_l2(k: usize) -> Result<f64> {
    let k = k as f64;
    Ok(0.5 * k * PI.ln() - log_gamma(0.5 * k + 1.0)?)
}

/// `ln |C_{δ,r}|` for the cone of opening angle `δ` intersected with the
/// Euclidean ball of radius `r`.
///
/// Sum of the conical part `ω_{d-1} r^d sin^{d-1}(δ/2) cos(δ/2) / d` and the
/// spherical cap. The cap is written as `½ ω_{d-1} B(sin²(δ/2); (d+1)/2, ½)`,
/// which equals `½ ω_{d-1} (B(½, (d+1)/2) - B(cos²(δ/2); ½, (d+1)/2))` but
/// avoids subtracting two nearly equal numbers in high dimension.
pub fn volume_cone(dim: usize, radius: f64, angle: f64) -> Result<f64> {
    if dim < 2 {
        return Err(Error::Domain(format!("cone needs dimension >= 2, got {dim}")));
    }
    check_radius(radius)?;
    check_angle(angle)?;
    let d = dim as f64;
    let half = 0.5 * angle;
    let (s, c) = half.sin_cos();
    let log_omega = log_unit_ball_l2(dim - 1)?;
    let conical = (d - 1.0) * s.ln() + c.ln() - d.ln();
    let b = 0.5 * (d + 1.0);
    let cap = if c * c < 1e-3 {
        // near δ = π, sin² rounds to 1; use the cos² form, whose argument is exact
        let full = log_beta(0.5, b)?;
        let head = log_incomplete_beta(c * c, 0.5, b)?;
        full + (-(head - full).exp()).ln_1p()
    } else {
        log_incomplete_beta(s * s, b, 0.5)?
    } - 2f64.ln();
    Ok(log_omega + d * radius.ln() + log_add_exp(conical, cap))
}

/// `ln |C + (ε/2) B_2|` upper estimate: the volume of a cone with the same
/// angle, apex moved back along the axis by `s = (ε/2) / sin(δ/2)` and radius
/// `r + s + ε/2`.
///
/// Moving the apex back by `s` pushes the lateral surface out by
/// `s sin(δ/2) = ε/2`, so this cone contains the Minkowski sum.
pub fn cone_inflated_log_volume(dim: usize, radius: f64, angle: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_angle(angle)?;
    let shift = 0.5 * epsilon / (0.5 * angle).sin();
    volume_cone(dim, radius + shift + 0.5 * epsilon, angle)
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("epsilon must be positive and finite, got {eps}")));
    }
    Ok(())
}

/// Packing bounds for a ball of radius `r`: `(r/ε)^d <= P <= (1 + 2r/ε)^d`.
///
/// The lower bound is clamped at one point (log 0) when `r < ε`.
pub fn packing_bounds_ball(dim: usize, radius: f64, epsilon: f64) -> Result<PackingBounds> {
    check_radius(radius)?;
    check_epsilon(epsilon)?;
    let d = dim as f64;
    Ok(PackingBounds {
        log_lower: (d * (radius / epsilon).ln()).max(0.0),
        log_upper: d * (2.0 * radius / epsilon).ln_1p(),
    })
}

/// Volume-ratio packing bounds for a general body `K`:
/// `|K| / |ε B| <= P(K, ε) <= |K + (ε/2) B| / |(ε/2) B|`.
///
/// The caller supplies `ln |K|` and `ln |K + (ε/2) B|` (or of any superset).
pub fn packing_bounds_general(
    log_volume_body: f64,
    log_volume_inflated: f64,
    dim: usize,
    epsilon: f64,
    norm: Norm,
) -> Result<PackingBounds> {
    check_epsilon(epsilon)?;
    if log_volume_inflated < log_volume_body {
        return Err(Error::Inconsistent(format!(
            "inflated body volume (ln {log_volume_inflated}) is below the body volume (ln {log_volume_body})"
        )));
    }
    let lower = log_volume_body - volume_ball(dim, epsilon, norm)?;
    let upper = log_volume_inflated - volume_ball(dim, 0.5 * epsilon, norm)?;
    Ok(PackingBounds { log_lower: lower.max(0.0), log_upper: upper.max(0.0) })
}

/// Euclidean packing bounds for the cone `C_{δ,r}`, using the shifted-apex
/// superset for the inflated body.
pub fn packing_bounds_cone(dim: usize, radius: f64, angle: f64, epsilon: f64) -> Result<PackingBounds> {
    let body = volume_cone(dim, radius, angle)?;
    let inflated = cone_inflated_log_volume(dim, radius, angle, epsilon)?;
    packing_bounds_general(body, inflated, dim, epsilon, Norm::L2)
}

/// Which radius factor the mean-field exponent uses.
///
/// The counting theorem uses `(1 + 2r/ε)^d`; the threshold corollary and the
/// packing proposition it rests on use `(1 + 4r/ε)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanFieldConvention {
    /// `(1 + 2r/ε)^d`
    #[default]
    Theorem,
    /// `(1 + 4r/ε)^d`
    Corollary,
}

impl MeanFieldConvention {
    pub fn radius_factor(self) -> f64 {
        match self {
            MeanFieldConvention::Theorem => 2.0,
            MeanFieldConvention::Corollary => 4.0,
        }
    }
}

/// `ln ln(e + e (2r)^q / ε^q)`, with `q = +inf` allowed.
pub fn log_log_meanfield_base(radius: f64, epsilon: f64, q: f64) -> Result<f64> {
    check_radius(radius)?;
    check_epsilon(epsilon)?;
    if !(q >= 1.0) {
        return Err(Error::Domain(format!("q must be >= 1, got {q}")));
    }
    let ratio = 2.0 * radius / epsilon;
    // ln(e + e t) = 1 + ln(1 + t) with t = ratio^q
    let ln_one_plus_t = if q.is_infinite() {
        if ratio < 1.0 {
            0.0
        } else if ratio == 1.0 {
            2f64.ln()
        } else {
            f64::INFINITY
        }
    } else {
        softplus(q * ratio.ln())
    };
    Ok((1.0 + ln_one_plus_t).ln())
}

/// Upper bound on the packing number of empirical measures in `W_q`:
/// `ln P <= (1 + k r/ε)^d ln(e + e (2r)^q / ε^q)` with `k` set by the
/// convention. Returned on the `ln` scale when representable, else `ln ln`.
pub fn packing_wasserstein_upper(
    dim: usize,
    radius: f64,
    epsilon: f64,
    q: f64,
    convention: MeanFieldConvention,
) -> Result<LogCount> {
    let ln_ln_base = log_log_meanfield_base(radius, epsilon, q)?;
    let ln_exponent = dim as f64 * (convention.radius_factor() * radius / epsilon).ln_1p();
    let ln_ln = ln_exponent + ln_ln_base;
    let ln = ln_ln.exp();
    Ok(if ln.is_finite() { LogCount::from_ln(ln) } else { LogCount::from_ln_ln(ln_ln) })
}

/// The known part of the mean-field packing lower bound,
/// `ln P(G, W_q, ε) >= ε^{-d} - ln C`, where the constant `C` is not given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldLower {
    /// `ε^{-d}`, the only explicit term, as a [`LogCount`] of `ln P`.
    pub known_term: LogCount,
    /// Always true: an unquantified additive constant `-ln C` is omitted.
    pub unknown_additive_constant: bool,
}

pub fn packing_wasserstein_lower(dim: usize, epsilon: f64) -> Result<MeanFieldLower> {
    check_epsilon(epsilon)?;
    // ln P >= ε^{-d}, so ln ln P >= -d ln ε
    let ln_ln = -(dim as f64) * epsilon.ln();
    let ln = ln_ln.exp();
    let known_term = if ln.is_finite() { LogCount::from_ln(ln) } else { LogCount::from_ln_ln(ln_ln) };
    Ok(MeanFieldLower { known_term, unknown_additive_constant: true })
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn cone3(r: f64, angle: f64) -> f64 {
        (2.0 * PI / 3.0) * (1.0 - (0.5 * angle).cos()) * r.powi(3)
    }

    #[test]
    fn ball_volume_examples() {
        assert!((volume_ball(3, 2.0, Norm::Linf).unwrap() - 64f64.ln()).abs() < TOL);
        assert!((volume_ball(2, 1.0, Norm::L2).unwrap() - PI.ln()).abs() < TOL);
        let expected = (8.0 * PI * PI / 15.0 * 1.5f64.powi(5)).ln();
        assert!((volume_ball(5, 1.5, Norm::L2).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 3.688_176_652_817_248).abs() < 1e-12);
    }

    #[test]
    fn lp_ball_interpolates_known_cases() {
        // l1 ball in d dims: 2^d r^d / d!
        let got = volume_ball(4, 1.0, Norm::Lp(1.0)).unwrap();
        assert!((got - (16.0f64 / 24.0).ln()).abs() < 1e-12);
        let l2 = volume_ball(6, 0.7, Norm::Lp(2.0)).unwrap();
        assert!((l2 - volume_ball(6, 0.7, Norm::L2).unwrap()).abs() < 1e-14);
        assert!(volume_ball(3, 1.0, Norm::Lp(0.5)).is_err());
    }

    #[test]
    fn cone_volume_examples() {
        let v = volume_cone(2, 1.0, PI - 1e-12).unwrap();
        assert!((v - (PI / 2.0).ln()).abs() < 1e-9);
        let v = volume_cone(3, 1.0, PI / 2.0).unwrap();
        assert!((v - (-0.488_682_399_558_279_9)).abs() < 1e-12);
        assert!((v.exp() - 0.613_434_123_007_073_4).abs() < 1e-12);
        let v2 = volume_cone(3, 2.0, PI / 2.0).unwrap();
        assert!((v2 - v - 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cone_matches_solid_angle_formula_in_3d() {
        for &a in &[0.2, 1.0, 2.0, 3.0] {
            let got = volume_cone(3, 1.0, a).unwrap().exp();
            let want = cone3(1.0, a);
            assert!((got - want).abs() / want < 1e-9, "angle {a}: {got} vs {want}");
        }
    }

    #[test]
    fn cone_stays_inside_half_ball() {
        for &d in &[2usize, 3, 10, 100, 768] {
            let half_ball = volume_ball(d, 1.0, Norm::L2).unwrap() - 2f64.ln();
            for &a in &[0.1, 1.0, 2.0, 3.0, PI - 1e-9] {
                assert!(volume_cone(d, 1.0, a).unwrap() <= half_ball + 1e-12, "d={d} a={a}");
            }
            let near_pi = volume_cone(d, 1.0, PI - 1e-12).unwrap();
            assert!((near_pi - half_ball).abs() < 1e-6, "d={d}");
        }
    }

    #[test]
    fn cone_domain_errors() {
        assert!(volume_cone(1, 1.0, 1.0).is_err());
        assert!(volume_cone(3, 1.0, 0.0).is_err());
        assert!(volume_cone(3, 1.0, PI).is_err());
        assert!(volume_cone(3, -1.0, 1.0).is_err());
    }

    #[test]
    fn ball_packing_examples() {
        let b = packing_bounds_ball(1, 1.0, 1.0).unwrap();
        assert_eq!(b.log_lower, 0.0);
        assert!((b.log_upper - 3f64.ln()).abs() < TOL);
        let b = packing_bounds_ball(2, 2.0, 1.0).unwrap();
        assert!((b.log_lower - 2.0 * 2f64.ln()).abs() < TOL);
        assert!((b.log_upper - 2.0 * 5f64.ln()).abs() < TOL);
        let b = packing_bounds_ball(4, 0.1, 1.0).unwrap();
        assert_eq!(b.log_lower, 0.0);
        assert!(b.log_upper >= b.log_lower);
    }

    #[test]
    fn general_packing_examples() {
        // K = [0, 2], inflated [-0.5, 2.5]
        let b = packing_bounds_general(2f64.ln(), 3f64.ln(), 1, 1.0, Norm::L2).unwrap();
        assert!(b.log_lower.abs() < TOL);
        assert!((b.log_upper - 3f64.ln()).abs() < TOL);
        assert!(packing_bounds_general(1.0, 0.5, 1, 1.0, Norm::L2).is_err());

        let eps = 0.01;
        let b = packing_bounds_cone(3, 1.0, PI / 2.0, eps).unwrap();
        let want = 0.613_434_123_007_073_4f64.ln() - (4.0 / 3.0 * PI * eps.powi(3)).ln();
        assert!((b.log_lower - want).abs() < 1e-10);
        assert!(b.log_upper > b.log_lower);
    }

    #[test]
    fn inflated_cone_contains_minkowski_sum_samples() {
        use rand::{Rng, SeedableRng};
        let (r, angle, eps): (f64, f64, f64) = (1.0, 1.2, 0.3);
        let shift = 0.5 * eps / (0.5 * angle).sin();
        let outer_r = r + shift + 0.5 * eps;
        let cos_h = (0.5 * angle).cos();
        let in_cone = |x: [f64; 3], apex: f64, rad: f64| {
            let y = [x[0] + apex, x[1], x[2]];
            let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
            n <= rad && y[0] >= n * cos_h - 1e-12
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 20_000 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            if !in_cone(x, 0.0, r) {
                continue;
            }
            let z: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let zn = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
            if zn > 1.0 || zn == 0.0 {
                continue;
            }
            // push to the sphere of radius ε/2 so the test probes the boundary
            let p = [x[0] + z[0] / zn * eps / 2.0, x[1] + z[1] / zn * eps / 2.0, x[2] + z[2] / zn * eps / 2.0];
            assert!(in_cone(p, shift, outer_r), "{p:?} escaped");
            checked += 1;
        }
    }

    #[test]
    fn wasserstein_upper_examples() {
        let c = packing_wasserstein_upper(1, 1.0, 1.0, 1.0, MeanFieldConvention::Theorem).unwrap();
        assert!((c.ln() - 6.295_836_866_004_329).abs() < 1e-12);
        // q = inf with 2r < ε: base is e, so ln count = (1 + 2r/ε)^d
        let c = packing_wasserstein_upper(3, 0.2, 1.0, f64::INFINITY, MeanFieldConvention::Theorem).unwrap();
        assert!((c.ln() - 1.4f64.powi(3)).abs() < 1e-12);
        let mut prev = 0.0;
        for &eps in &[1.0, 0.5, 0.25, 0.1] {
            let c = packing_wasserstein_upper(2, 1.0, eps, 2.0, MeanFieldConvention::Theorem).unwrap();
            assert!(c.ln() > prev && c.ln().is_finite());
            prev = c.ln();
        }
    }

    #[test]
    fn wasserstein_upper_switches_to_iterated_log() {
        let c = packing_wasserstein_upper(768, 63.62, 2f64.powi(-10), 2.0, MeanFieldConvention::Corollary).unwrap();
        assert_eq!(c.scale, crate::logcount::Scale::LnLn);
        let want = 768.0 * (4.0 * 63.62 * 1024.0f64).ln_1p();
        assert!(c.ln_ln() > want);
    }

    #[test]
    fn wasserstein_lower_flags_constant() {
        let l = packing_wasserstein_lower(2, 0.5).unwrap();
        assert!(l.unknown_additive_constant);
        assert!((l.known_term.ln() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_validation() {
        assert!(SupportGeometry::ball(0, 1.0, Norm::L2).is_err());
        assert!(SupportGeometry::cone(3, 1.0, 4.0).is_err());
        assert!(SupportGeometry::boxed(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        let b = SupportGeometry::boxed(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        assert!((b.log_volume().unwrap() - 4f64.ln()).abs() < TOL);
    }
}
