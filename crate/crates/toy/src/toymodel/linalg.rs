//! Dense row-major helpers and the column normalization operators.

use serde::{Deserialize, Serialize};

/// `out = W x` for a `rows × cols` row-major `W`.
pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        out[r] = dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `out += Wᵀ y` for a `rows × cols` row-major `W`.
pub(crate) fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let yr = y[r];
        if yr == 0.0 {
            continue;
        }
        for (o, wv) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *o += yr * wv;
        }
    }
}

/// `g += a bᵀ` into a `a.len() × b.len()` row-major block.
pub(crate) fn outer_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (r, &ar) in a.iter().enumerate() {
        if ar == 0.0 {
            continue;
        }
        for (gv, bv) in g[r * cols..(r + 1) * cols].iter_mut().zip(b) {
            *gv += ar * bv;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax written into `out`.
pub fn softmax(z: &[f64], out: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - m).exp();
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// The bound `N` on `‖Norm(x)‖∞` enforced by [`NormKind::LinfProjection`].
pub const NORM_BOUND: f64 = 1.0;

const RMS_EPS: f64 = 1e-6;

/// Column-wise normalization applied before attention and before the MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `x / max(1, ‖x‖∞)`: the identity inside the unit cube, a radial
    /// projection onto it outside.
    #[default]
    LinfProjection,
    /// `x / sqrt(mean(x²) + 1e-6)`; bounded by `sqrt(d)` in sup norm.
    Rms,
    None,
}

impl NormKind {
    pub fn apply(self, x: &[f64], out: &mut [f64]) {
        match self {
            NormKind::None => out.copy_from_slice(x),
            NormKind::LinfProjection => {
                let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let s = if m > NORM_BOUND { NORM_BOUND / m } else { 1.0 };
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v * s;
                }
            }
            NormKind::Rms => {
                let rho = rms(x);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v / rho;
                }
            }
        }
    }

    /// Accumulates `Jᵀ dy` into `dx`, where `J` is the Jacobian of `apply` at `x`.
    pub fn backward(self, x: &[f64], dy: &[f64], dx: &mut [f64]) {
        match self {
            NormKind::None => {
                for (a, b) in dx.iter_mut().zip(dy) {
                    *a += b;
                }
            }
            NormKind::LinfProjection => {
                let k = argmax_abs(x);
                let m = x[k].abs();
                if m <= NORM_BOUND {
                    for (a, b) in dx.iter_mut().zip(dy) {
                        *a += b;
                    }
                    return;
                }
                for (a, b) in dx.iter_mut().zip(dy) {
                    *a += NORM_BOUND * b / m;
                }
                dx[k] -= NORM_BOUND * x[k].signum() * dot(dy, x) / (m * m);
            }
            NormKind::Rms => {
                let rho = rms(x);
                let c = dot(dy, x) / (x.len() as f64 * rho * rho * rho);
                for ((a, b), xv) in dx.iter_mut().zip(dy).zip(x) {
                    *a += b / rho - xv * c;
                }
            }
        }
    }
}

fn rms(x: &[f64]) -> f64 {
    (dot(x, x) / x.len() as f64 + RMS_EPS).sqrt()
}

fn argmax_abs(x: &[f64]) -> usize {
    let mut k = 0;
    for i in 1..x.len() {
        if x[i].abs() > x[k].abs() {
            k = i;
        }
    }
    k
}
