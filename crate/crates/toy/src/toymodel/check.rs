//! Numerical self-checks: finite-difference gradients and the symmetry
//! properties of position-free attention.

use super::{Input, ToyTransformer};
use crate::Result;

/// Worst tensor-wise relative error `‖g − fd‖ / max(‖g‖, ‖fd‖, 1e-4)` between
/// the analytic gradient and central differences.
///
/// The floor keeps tensors whose gradient has all but vanished (a saturated
/// attention head, say) from reporting finite-difference roundoff as error.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub worst_tensor: String,
    pub worst_rel_error: f64,
    pub per_tensor: Vec<(String, f64)>,
}

const GRAD_FLOOR: f64 = 1e-4;

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    diff / scale.max(GRAD_FLOOR)
}

/// Compares [`ToyTransformer::backward`] with central differences of
/// [`ToyTransformer::loss`] for every parameter tensor and the prompt.
pub fn gradient_check(model: &ToyTransformer, prompt: &[Vec<f64>], targets: &[usize], step: f64) -> Result<GradCheck> {
    let g = model.backward(prompt, targets, true)?;
    let gp = g.params.expect("requested");
    let mut probe = model.clone();
    let mut per_tensor = Vec::new();
    for (name, range) in model.tensors() {
        let mut fd = Vec::with_capacity(range.len());
        for i in range.clone() {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + step;
            let up = probe.loss(prompt, targets)?;
            probe.params_mut()[i] = orig - step;
            let down = probe.loss(prompt, targets)?;
            probe.params_mut()[i] = orig;
            fd.push((up - down) / (2.0 * step));
        }
        per_tensor.push((name, rel_error(&gp[range], &fd)));
    }
    let mut analytic = Vec::new();
    let mut fd = Vec::new();
    let mut y = prompt.to_vec();
    for (c, gc) in g.soft.iter().enumerate() {
        for j in 0..gc.len() {
            let orig = y[c][j];
            y[c][j] = orig + step;
            let up = model.loss(&y, targets)?;
            y[c][j] = orig - step;
            let down = model.loss(&y, targets)?;
            y[c][j] = orig;
            fd.push((up - down) / (2.0 * step));
            analytic.push(gc[j]);
        }
    }
    per_tensor.push(("prompt".into(), rel_error(&analytic, &fd)));
    let (worst_tensor, worst_rel_error) =
        per_tensor.iter().cloned().fold((String::new(), 0.0), |acc, (n, e)| if e > acc.1 { (n, e) } else { acc });
    Ok(GradCheck { worst_tensor, worst_rel_error, per_tensor })
}

/// Largest change of the final column when the first `m − 1` columns are
/// permuted by `perm`.
pub fn permutation_residual(model: &ToyTransformer, x: &[Vec<f64>], perm: &[usize]) -> Result<f64> {
    let base = model.forward(&Input::soft(x.to_vec()))?.last;
    let mut y: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
    y.push(x[x.len() - 1].clone());
    let moved = model.forward(&Input::soft(y))?.last;
    Ok(base.iter().zip(&moved).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Largest difference between column `i` of `L(X)` and column `i` of `L([X, X])`.
pub fn duplication_residual(model: &ToyTransformer, x: &[Vec<f64>]) -> Result<f64> {
    let l = model.config().layers;
    let single = model.forward(&Input::soft(x.to_vec()))?;
    let mut xx = x.to_vec();
    xx.extend_from_slice(x);
    let double = model.forward(&Input::soft(xx))?;
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        for (a, b) in single.column(l, i).iter().zip(double.column(l, i)) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}
