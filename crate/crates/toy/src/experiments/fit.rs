//! Sigmoid and straight-line fits for accessibility curves.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// `rate(n) ≈ ceiling / (1 + exp((n − midpoint) / scale))`, floor fixed at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidFit {
    pub midpoint: f64,
    pub scale: f64,
    pub floor: f64,
    pub ceiling: f64,
    /// Where the fitted curve crosses 0.5; `None` when the ceiling is at or below 0.5.
    pub n50: Option<f64>,
    /// `n50` lies outside the range of the fitted data.
    pub extrapolated: bool,
    pub r2: f64,
}

impl SigmoidFit {
    pub fn eval(&self, n: f64) -> f64 {
        self.floor + (self.ceiling - self.floor) * logistic(n, self.midpoint, self.scale)
    }
}

fn logistic(n: f64, n0: f64, w: f64) -> f64 {
    1.0 / (1.0 + ((n - n0) / w).exp())
}

/// Least-squares ceiling for fixed `(n0, w)`, clamped to `[0, 1]`, and the residual sum of squares.
fn profile(points: &[(f64, f64)], n0: f64, w: f64) -> (f64, f64) {
    let (mut sy, mut ss) = (0.0, 0.0);
    for &(n, y) in points {
        let s = logistic(n, n0, w);
        sy += s * y;
        ss += s * s;
    }
    let c = if ss > 0.0 { (sy / ss).clamp(0.0, 1.0) } else { 0.0 };
    let rss = points.iter().map(|&(n, y)| (y - c * logistic(n, n0, w)).powi(2)).sum();
    (c, rss)
}

/// Minimizes `f` from `x0` with the Nelder–Mead simplex method.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, max_iter: usize, tol: f64) -> (Vec<f64>, f64) {
    let k = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f(x0))];
    for i in 0..k {
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[k].1 - simplex[0].1).abs() <= tol * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let mut centroid = vec![0.0; k];
        for (x, _) in &simplex[..k] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / k as f64;
            }
        }
        let worst = simplex[k].clone();
        let refl = blend(&centroid, &worst.0, -1.0);
        let fr = f(&refl);
        if fr < simplex[0].1 {
            let exp = blend(&centroid, &worst.0, -2.0);
            let fe = f(&exp);
            simplex[k] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (refl, fr);
        } else {
            let con = if fr < worst.1 { blend(&centroid, &refl, 0.5) } else { blend(&centroid, &worst.0, 0.5) };
            let fc = f(&con);
            if fc < worst.1.min(fr) {
                simplex[k] = (con, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    s.0 = blend(&best, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Fits a decreasing sigmoid to `(n, rate)` points: a coarse grid over
/// midpoint and log-scale, then Nelder–Mead refinement, with the ceiling
/// solved in closed form at every step.
pub fn sigmoid_fit(points: &[(f64, f64)]) -> Result<SigmoidFit> {
    if points.len() < 4 {
        return Err(Error::Domain(format!("sigmoid fit needs at least 4 points, got {}", points.len())));
    }
    if points.iter().all(|p| p.1 >= 0.5) || points.iter().all(|p| p.1 <= 0.5) {
        return Err(Error::Degenerate("all rates lie on one side of 0.5; n50 would be extrapolated".into()));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1.0);
    let obj = |x: &[f64]| profile(points, x[0], x[1].exp()).1;
    let mut best = (vec![lo, 0.0], f64::INFINITY);
    for i in 0..=60 {
        let n0 = lo - 0.25 * span + 1.5 * span * i as f64 / 60.0;
        for j in 0..=30 {
            let lw = (0.01 * span).ln() + (100.0f64).ln() * j as f64 / 30.0;
            let v = obj(&[n0, lw]);
            if v < best.1 {
                best = (vec![n0, lw], v);
            }
        }
    }
    let (x, rss) = nelder_mead(obj, &best.0, 0.1, 5000, 1e-15);
    let (n0, w) = (x[0], x[1].exp());
    let (c, _) = profile(points, n0, w);
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let tss: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let n50 = (c > 0.5).then(|| n0 + w * (2.0 * c - 1.0).ln());
    let extrapolated = n50.is_none_or(|v| v < lo || v > hi);
    Ok(SigmoidFit { midpoint: n0, scale: w, floor: 0.0, ceiling: c, n50, extrapolated, r2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ slope x + intercept`.
pub fn slope_fit(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::Domain("line fit needs at least 2 points".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all x values coincide".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let tss: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(LineFit { slope, intercept, r2 })
}
