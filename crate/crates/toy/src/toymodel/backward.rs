//! Reverse-mode gradients of the cross-entropy loss.

use super::linalg::{dot, matvec_t_acc, outer_acc, softmax};
use super::{ForwardTrace, Input, ToyTransformer};
use crate::{Error, Result};

/// Loss value and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    /// Same layout as [`ToyTransformer::params`]; `None` when not requested.
    pub params: Option<Vec<f64>>,
    /// One gradient per soft-prompt column.
    pub soft: Vec<Vec<f64>>,
}

impl Gradients {
    fn add(&mut self, other: Gradients) {
        self.loss += other.loss;
        if let (Some(a), Some(b)) = (&mut self.params, other.params) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.soft.iter_mut().zip(other.soft) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

impl ToyTransformer {
    /// `Σ −ln p(tok | column pos)` over `targets = [(pos, tok)]` for a single
    /// forward pass, with gradients for the soft columns and optionally all
    /// parameters.
    pub fn loss_and_grad(&self, input: &Input, targets: &[(usize, usize)], want_params: bool) -> Result<Gradients> {
        let trace = self.forward(input)?;
        self.backward_trace(input, &trace, targets, want_params)
    }

    /// Teacher-forced loss `−Σᵢ ln p(xᵢ | [Y, x₁..x_{i−1}])` and its gradients.
    ///
    /// A causal model evaluates every prefix in one pass; otherwise each
    /// prefix gets its own forward and backward pass.
    pub fn backward(&self, prompt: &[Vec<f64>], targets: &[usize], want_params: bool) -> Result<Gradients> {
        if prompt.is_empty() || targets.is_empty() {
            return Err(Error::Domain("need at least one prompt column and one target".into()));
        }
        let m = prompt.len();
        let n = targets.len();
        if self.config().causal {
            let input = Input { soft: prompt.to_vec(), tokens: targets[..n - 1].to_vec() };
            let pairs: Vec<(usize, usize)> = targets.iter().enumerate().map(|(i, &t)| (m - 1 + i, t)).collect();
            return self.loss_and_grad(&input, &pairs, want_params);
        }
        let mut total: Option<Gradients> = None;
        for i in 0..n {
            let input = Input { soft: prompt.to_vec(), tokens: targets[..i].to_vec() };
            let g = self.loss_and_grad(&input, &[(m - 1 + i, targets[i])], want_params)?;
            match &mut total {
                None => total = Some(g),
                Some(acc) => acc.add(g),
            }
        }
        Ok(total.expect("n >= 1"))
    }

    /// Teacher-forced loss without gradients.
    pub fn loss(&self, prompt: &[Vec<f64>], targets: &[usize]) -> Result<f64> {
        let m = prompt.len();
        let n = targets.len();
        let nll = |logits: &[f64], t: usize| {
            let mut p = vec![0.0; logits.len()];
            softmax(logits, &mut p);
            -p[t].ln()
        };
        if self.config().causal {
            let tr = self.forward(&Input { soft: prompt.to_vec(), tokens: targets[..n - 1].to_vec() })?;
            return Ok(targets.iter().enumerate().map(|(i, &t)| nll(&self.logits_at(&tr, m - 1 + i), t)).sum());
        }
        let mut total = 0.0;
        for i in 0..n {
            let tr = self.forward(&Input { soft: prompt.to_vec(), tokens: targets[..i].to_vec() })?;
            total += nll(&tr.logits, targets[i]);
        }
        Ok(total)
    }

    pub(crate) fn backward_trace(&self, input: &Input, trace: &ForwardTrace, targets: &[(usize, usize)], want_params: bool) -> Result<Gradients> {
        let c = self.config();
        let (d, s, sv, f, v) = (c.dim, c.head_dim, c.value_dim, c.mlp_dim, c.vocab);
        let t = input.len();
        let p = self.params();
        let lay = &self.layout;
        let mut g = if want_params { vec![0.0; p.len()] } else { Vec::new() };
        let mut dx = vec![0.0; t * d];
        let mut loss = 0.0;
        let mut probs = vec![0.0; v];
        for &(pos, tok) in targets {
            if pos >= t || tok >= v {
                return Err(Error::Domain(format!("target ({pos}, {tok}) outside sequence length {t} or vocabulary {v}")));
            }
            let x_last = trace.column(c.layers, pos);
            softmax(&self.logits_of(x_last), &mut probs);
            loss -= probs[tok].ln();
            probs[tok] -= 1.0;
            if want_params {
                outer_acc(&mut g[lay.unembed..lay.unembed + v * d], &probs, x_last);
            }
            self.unembed_t_acc(&probs, &mut dx[pos * d..(pos + 1) * d]);
        }

        let mut tmp_f = vec![0.0; f];
        let mut tmp_d = vec![0.0; d];
        for (li, ls) in lay.layers.iter().enumerate().rev() {
            let cache = &trace.cache[li];
            let x_in = &trace.activations[li];

            // MLP branch: out = x_mid + W2 relu(W1 n2 + b1) + b2 [+ n2]
            let mut dx_mid = dx.clone();
            for i in 0..t {
                let dyi = &dx[i * d..(i + 1) * d];
                let hi = &cache.h[i * f..(i + 1) * f];
                let zi = &cache.z1[i * f..(i + 1) * f];
                let n2i = &cache.n2[i * d..(i + 1) * d];
                if want_params {
                    g[ls.b2..ls.b2 + d].iter_mut().zip(dyi).for_each(|(a, b)| *a += b);
                    outer_acc(&mut g[ls.w2..ls.w2 + d * f], dyi, hi);
                }
                tmp_f.iter_mut().for_each(|x| *x = 0.0);
                matvec_t_acc(&p[ls.w2..ls.w2 + d * f], d, f, dyi, &mut tmp_f);
                for (dz, zv) in tmp_f.iter_mut().zip(zi) {
                    if *zv <= 0.0 {
                        *dz = 0.0;
                    }
                }
                if want_params {
                    g[ls.b1..ls.b1 + f].iter_mut().zip(&tmp_f).for_each(|(a, b)| *a += b);
                    outer_acc(&mut g[ls.w1..ls.w1 + f * d], &tmp_f, n2i);
                }
                if c.mlp_inner_skip {
                    tmp_d.copy_from_slice(dyi);
                } else {
                    tmp_d.iter_mut().for_each(|x| *x = 0.0);
                }
                matvec_t_acc(&p[ls.w1..ls.w1 + f * d], f, d, &tmp_f, &mut tmp_d);
                c.norm.backward(&cache.x_mid[i * d..(i + 1) * d], &tmp_d, &mut dx_mid[i * d..(i + 1) * d]);
            }

            // attention branch: x_mid = x_in + Σ_h Wo o_h
            let mut dx_in = dx_mid.clone();
            let mut dn1 = vec![0.0; t * d];
            for (hs, hc) in ls.heads.iter().zip(&cache.heads) {
                let mut d_o = vec![0.0; t * sv];
                for i in 0..t {
                    let gi = &dx_mid[i * d..(i + 1) * d];
                    matvec_t_acc(&p[hs.wo..hs.wo + d * sv], d, sv, gi, &mut d_o[i * sv..(i + 1) * sv]);
                    if want_params {
                        outer_acc(&mut g[hs.wo..hs.wo + d * sv], gi, &hc.o[i * sv..(i + 1) * sv]);
                    }
                }
                let mut dq = vec![0.0; t * s];
                let mut dk = vec![0.0; t * s];
                let mut dv = vec![0.0; t * sv];
                let mut da = vec![0.0; t];
                for i in 0..t {
                    let vis = self.visible(i, t);
                    let doi = &d_o[i * sv..(i + 1) * sv];
                    let arow = &hc.attn[i * t..(i + 1) * t];
                    let mut mean = 0.0;
                    for j in vis.clone() {
                        da[j] = dot(doi, &hc.v[j * sv..(j + 1) * sv]);
                        mean += arow[j] * da[j];
                        for (a, b) in dv[j * sv..(j + 1) * sv].iter_mut().zip(doi) {
                            *a += arow[j] * b;
                        }
                    }
                    for j in vis {
                        let ds = arow[j] * (da[j] - mean);
                        if ds == 0.0 {
                            continue;
                        }
                        for r in 0..s {
                            dq[i * s + r] += ds * hc.k[j * s + r];
                            dk[j * s + r] += ds * hc.q[i * s + r];
                        }
                    }
                }
                for i in 0..t {
                    let ni = &cache.n1[i * d..(i + 1) * d];
                    let dni = &mut dn1[i * d..(i + 1) * d];
                    matvec_t_acc(&p[hs.wq..hs.wq + s * d], s, d, &dq[i * s..(i + 1) * s], dni);
                    matvec_t_acc(&p[hs.wk..hs.wk + s * d], s, d, &dk[i * s..(i + 1) * s], dni);
                    matvec_t_acc(&p[hs.wv..hs.wv + sv * d], sv, d, &dv[i * sv..(i + 1) * sv], dni);
                    if want_params {
                        outer_acc(&mut g[hs.wq..hs.wq + s * d], &dq[i * s..(i + 1) * s], ni);
                        outer_acc(&mut g[hs.wk..hs.wk + s * d], &dk[i * s..(i + 1) * s], ni);
                        outer_acc(&mut g[hs.wv..hs.wv + sv * d], &dv[i * sv..(i + 1) * sv], ni);
                    }
                }
            }
            for i in 0..t {
                c.norm.backward(&x_in[i * d..(i + 1) * d], &dn1[i * d..(i + 1) * d], &mut dx_in[i * d..(i + 1) * d]);
            }
            dx = dx_in;
        }

        let m = input.soft.len();
        let soft = (0..m).map(|i| dx[i * d..(i + 1) * d].to_vec()).collect();
        if want_params {
            for (k, &tok) in input.tokens.iter().enumerate() {
                let i = m + k;
                let e = lay.embed + tok * d;
                g[e..e + d].iter_mut().zip(&dx[i * d..(i + 1) * d]).for_each(|(a, b)| *a += b);
            }
            if let Some(o) = lay.pos {
                g[o..o + t * d].iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            }
        }
        Ok(Gradients { loss, params: want_params.then_some(g), soft })
    }
}
