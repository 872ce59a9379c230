//! A small decoder-only transformer with exact forward and reverse-mode passes.
//!
//! Each layer computes `X' = X + Att(Norm(X))` followed by
//! `X'' = X' + MLP(Norm(X'))`; the next-token distribution is the softmax of
//! `F` applied to the last column. All parameters live in one flat buffer
//! whose layout is fixed by the [`ToyConfig`], which keeps optimizers and
//! finite-difference checks independent of the architecture.

mod backward;
pub mod check;
mod io;
pub mod linalg;
mod probes;

pub use backward::Gradients;
pub use io::{load, read_from, save, write_to};
pub use linalg::{argmax, softmax, NormKind, NORM_BOUND};
pub use probes::{greedy_decode, next_token_region, plane_cut_map, radius_profile, PlaneCut};

use crate::{Error, Result};
use linalg::{matvec, matvec_t_acc};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Positional {
    #[default]
    None,
    /// One learned vector per absolute position, added to the input columns.
    Learned { max_len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub vocab: usize,
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    /// Query/key width `s`.
    pub head_dim: usize,
    /// Value width `s'`.
    pub value_dim: usize,
    pub mlp_dim: usize,
    #[serde(default)]
    pub norm: NormKind,
    #[serde(default)]
    pub positional: Positional,
    /// Query `i` attends only to columns `j <= i`.
    #[serde(default = "default_true")]
    pub causal: bool,
    /// Adds `Norm(X')` inside the MLP branch as well as the outer residual.
    #[serde(default)]
    pub mlp_inner_skip: bool,
}

fn default_true() -> bool {
    true
}

impl ToyConfig {
    /// `s = s' = max(1, d / h)`, `d_ff = 4d`, projection norm, no positions, causal.
    pub fn new(vocab: usize, dim: usize, layers: usize, heads: usize) -> Self {
        let s = (dim / heads.max(1)).max(1);
        ToyConfig {
            vocab,
            dim,
            layers,
            heads,
            head_dim: s,
            value_dim: s,
            mlp_dim: 4 * dim,
            norm: NormKind::default(),
            positional: Positional::None,
            causal: true,
            mlp_inner_skip: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab < 2 || self.dim < 2 {
            return Err(Error::Domain(format!("need vocab >= 2 and dim >= 2, got {} and {}", self.vocab, self.dim)));
        }
        if self.heads == 0 || self.head_dim == 0 || self.value_dim == 0 || self.mlp_dim == 0 {
            return Err(Error::Domain("heads, head_dim, value_dim and mlp_dim must be positive".into()));
        }
        if let Positional::Learned { max_len: 0 } = self.positional {
            return Err(Error::Domain("positional max_len must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct HeadSlots {
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    pub wo: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerSlots {
    pub heads: Vec<HeadSlots>,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

/// Offsets of every tensor inside the flat parameter buffer.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    /// `|V| × d`, row `t` is the embedding of token `t`.
    pub embed: usize,
    /// `|V| × d`.
    pub unembed: usize,
    /// `max_len × d`.
    pub pos: Option<usize>,
    pub layers: Vec<LayerSlots>,
    pub len: usize,
}

impl Layout {
    fn new(c: &ToyConfig) -> Self {
        let mut off = 0;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let (d, s, sv, f) = (c.dim, c.head_dim, c.value_dim, c.mlp_dim);
        let embed = take(c.vocab * d);
        let unembed = take(c.vocab * d);
        let pos = match c.positional {
            Positional::Learned { max_len } => Some(take(max_len * d)),
            Positional::None => None,
        };
        let layers = (0..c.layers)
            .map(|_| LayerSlots {
                heads: (0..c.heads)
                    .map(|_| HeadSlots { wq: take(s * d), wk: take(s * d), wv: take(sv * d), wo: take(d * sv) })
                    .collect(),
                w1: take(f * d),
                b1: take(f),
                w2: take(d * f),
                b2: take(d),
            })
            .collect();
        Layout { embed, unembed, pos, layers, len: off }
    }
}

/// Standard deviations used by [`ToyTransformer::random`]. Weight matrices
/// use `gain / sqrt(fan_in)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitScales {
    pub embed: f64,
    pub unembed_gain: f64,
    pub attention_gain: f64,
    pub mlp_gain: f64,
    pub positional: f64,
}

impl Default for InitScales {
    fn default() -> Self {
        InitScales { embed: 1.0, unembed_gain: 1.0, attention_gain: 1.0, mlp_gain: 1.0, positional: 0.1 }
    }
}

/// A prompt: free real-valued columns followed by embedded tokens.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Input {
    pub soft: Vec<Vec<f64>>,
    pub tokens: Vec<usize>,
}

impl Input {
    pub fn soft(columns: Vec<Vec<f64>>) -> Self {
        Input { soft: columns, tokens: Vec::new() }
    }

    pub fn tokens(tokens: Vec<usize>) -> Self {
        Input { soft: Vec::new(), tokens }
    }

    pub fn len(&self) -> usize {
        self.soft.len() + self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub(crate) struct HeadCache {
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    /// `T × T`, row `i` holds the weights of query `i` (zero where masked).
    pub attn: Vec<f64>,
    pub o: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    pub n1: Vec<f64>,
    pub heads: Vec<HeadCache>,
    pub x_mid: Vec<f64>,
    pub n2: Vec<f64>,
    pub z1: Vec<f64>,
    pub h: Vec<f64>,
}

/// Everything computed by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `l + 1` activations, each `T × d` row-major: row `i` is column `i` of `X_k`.
    pub activations: Vec<Vec<f64>>,
    /// `X_l[:, -1]`.
    pub last: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub(crate) cache: Vec<LayerCache>,
    pub(crate) dim: usize,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.activations[0].len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column `i` of the activation after `layer` layers (0 is the input).
    pub fn column(&self, layer: usize, i: usize) -> &[f64] {
        &self.activations[layer][i * self.dim..(i + 1) * self.dim]
    }

    /// Attention weights of `head` in `layer` (0-based), `T × T` row-major.
    pub fn attention(&self, layer: usize, head: usize) -> &[f64] {
        &self.cache[layer].heads[head].attn
    }
}

#[derive(Debug, Clone)]
pub struct ToyTransformer {
    cfg: ToyConfig,
    pub(crate) layout: Layout,
    params: Vec<f64>,
}

impl ToyTransformer {
    pub fn zeros(cfg: ToyConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        let params = vec![0.0; layout.len];
        Ok(ToyTransformer { cfg, layout, params })
    }

    pub fn random<R: Rng>(cfg: ToyConfig, init: &InitScales, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(cfg)?;
        let (d, s, sv, f) = (m.cfg.dim, m.cfg.head_dim, m.cfg.value_dim, m.cfg.mlp_dim);
        let mut fill = |params: &mut [f64], std: f64| {
            if std > 0.0 {
                let n = Normal::new(0.0, std).expect("finite std");
                params.iter_mut().for_each(|p| *p = n.sample(rng));
            }
        };
        let sq = |x: usize| (x as f64).sqrt();
        let layout = m.layout.clone();
        let v = m.cfg.vocab;
        let p = &mut m.params;
        fill(&mut p[layout.embed..layout.embed + v * d], init.embed);
        fill(&mut p[layout.unembed..layout.unembed + v * d], init.unembed_gain / sq(d));
        if let (Some(o), Positional::Learned { max_len }) = (layout.pos, m.cfg.positional) {
            fill(&mut p[o..o + max_len * d], init.positional);
        }
        for l in &layout.layers {
            for h in &l.heads {
                fill(&mut p[h.wq..h.wq + s * d], init.attention_gain / sq(d));
                fill(&mut p[h.wk..h.wk + s * d], init.attention_gain / sq(d));
                fill(&mut p[h.wv..h.wv + sv * d], init.attention_gain / sq(d));
                fill(&mut p[h.wo..h.wo + d * sv], init.attention_gain / sq(sv));
            }
            fill(&mut p[l.w1..l.w1 + f * d], init.mlp_gain / sq(d));
            fill(&mut p[l.w2..l.w2 + d * f], init.mlp_gain / sq(f));
        }
        Ok(m)
    }

    /// Rebuilds a model from a configuration and a flat parameter buffer.
    pub fn from_params(cfg: ToyConfig, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(cfg)?;
        if params.len() != m.params.len() {
            return Err(Error::Mismatch(format!("expected {} parameters, got {}", m.params.len(), params.len())));
        }
        m.params = params;
        Ok(m)
    }

    pub fn config(&self) -> &ToyConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Named ranges of the parameter buffer, in storage order.
    pub fn tensors(&self) -> Vec<(String, Range<usize>)> {
        let c = &self.cfg;
        let (d, s, sv, f) = (c.dim, c.head_dim, c.value_dim, c.mlp_dim);
        let l = &self.layout;
        let mut out = vec![
            ("embed".to_string(), l.embed..l.embed + c.vocab * d),
            ("unembed".to_string(), l.unembed..l.unembed + c.vocab * d),
        ];
        if let (Some(o), Positional::Learned { max_len }) = (l.pos, c.positional) {
            out.push(("positional".into(), o..o + max_len * d));
        }
        for (i, ls) in l.layers.iter().enumerate() {
            for (j, h) in ls.heads.iter().enumerate() {
                out.push((format!("layer{i}.head{j}.wq"), h.wq..h.wq + s * d));
                out.push((format!("layer{i}.head{j}.wk"), h.wk..h.wk + s * d));
                out.push((format!("layer{i}.head{j}.wv"), h.wv..h.wv + sv * d));
                out.push((format!("layer{i}.head{j}.wo"), h.wo..h.wo + d * sv));
            }
            out.push((format!("layer{i}.w1"), ls.w1..ls.w1 + f * d));
            out.push((format!("layer{i}.b1"), ls.b1..ls.b1 + f));
            out.push((format!("layer{i}.w2"), ls.w2..ls.w2 + d * f));
            out.push((format!("layer{i}.b2"), ls.b2..ls.b2 + d));
        }
        out
    }

    /// Column `t` of `E`.
    pub fn embedding(&self, t: usize) -> &[f64] {
        let d = self.cfg.dim;
        &self.params[self.layout.embed + t * d..self.layout.embed + (t + 1) * d]
    }

    pub fn embedding_mut(&mut self, t: usize) -> &mut [f64] {
        let d = self.cfg.dim;
        &mut self.params[self.layout.embed + t * d..self.layout.embed + (t + 1) * d]
    }

    /// Row `t` of `F`.
    pub fn unembedding(&self, t: usize) -> &[f64] {
        let d = self.cfg.dim;
        &self.params[self.layout.unembed + t * d..self.layout.unembed + (t + 1) * d]
    }

    pub fn unembedding_mut(&mut self, t: usize) -> &mut [f64] {
        let d = self.cfg.dim;
        &mut self.params[self.layout.unembed + t * d..self.layout.unembed + (t + 1) * d]
    }

    pub fn unembedding_rows(&self) -> Vec<Vec<f64>> {
        (0..self.cfg.vocab).map(|t| self.unembedding(t).to_vec()).collect()
    }

    /// `F x`.
    pub fn logits_of(&self, x: &[f64]) -> Vec<f64> {
        let c = &self.cfg;
        let mut z = vec![0.0; c.vocab];
        matvec(&self.params[self.layout.unembed..self.layout.unembed + c.vocab * c.dim], c.vocab, c.dim, x, &mut z);
        z
    }

    /// Logits read off the final activation at position `pos`.
    pub fn logits_at(&self, trace: &ForwardTrace, pos: usize) -> Vec<f64> {
        self.logits_of(trace.column(self.cfg.layers, pos))
    }

    pub(crate) fn embed_input(&self, input: &Input) -> Result<Vec<f64>> {
        let d = self.cfg.dim;
        let t = input.len();
        if t == 0 {
            return Err(Error::Domain("prompt must contain at least one column".into()));
        }
        if let Positional::Learned { max_len } = self.cfg.positional {
            if t > max_len {
                return Err(Error::Domain(format!("sequence length {t} exceeds positional table {max_len}")));
            }
        }
        let mut x = Vec::with_capacity(t * d);
        for col in &input.soft {
            if col.len() != d {
                return Err(Error::Mismatch(format!("soft column has length {}, model dim is {d}", col.len())));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("soft prompt contains a non-finite value".into()));
            }
            x.extend_from_slice(col);
        }
        for &tok in &input.tokens {
            if tok >= self.cfg.vocab {
                return Err(Error::Domain(format!("token {tok} outside vocabulary of size {}", self.cfg.vocab)));
            }
            x.extend_from_slice(self.embedding(tok));
        }
        if let Some(o) = self.layout.pos {
            for (xi, pi) in x.iter_mut().zip(&self.params[o..o + t * d]) {
                *xi += pi;
            }
        }
        Ok(x)
    }

    /// Range of keys visible to query `i` in a length-`t` sequence.
    pub(crate) fn visible(&self, i: usize, t: usize) -> Range<usize> {
        if self.cfg.causal {
            0..i + 1
        } else {
            0..t
        }
    }

    pub fn forward(&self, input: &Input) -> Result<ForwardTrace> {
        let c = &self.cfg;
        let (d, s, sv, f) = (c.dim, c.head_dim, c.value_dim, c.mlp_dim);
        let p = &self.params;
        let mut x = self.embed_input(input)?;
        let t = input.len();
        let mut activations = vec![x.clone()];
        let mut cache = Vec::with_capacity(c.layers);
        let mut scores = vec![0.0; t];
        let mut tmp = vec![0.0; d];
        for ls in &self.layout.layers {
            let mut n1 = vec![0.0; t * d];
            for i in 0..t {
                c.norm.apply(&x[i * d..(i + 1) * d], &mut n1[i * d..(i + 1) * d]);
            }
            let mut x_mid = x.clone();
            let mut heads = Vec::with_capacity(c.heads);
            for hs in &ls.heads {
                let mut q = vec![0.0; t * s];
                let mut k = vec![0.0; t * s];
                let mut v = vec![0.0; t * sv];
                for i in 0..t {
                    let ni = &n1[i * d..(i + 1) * d];
                    matvec(&p[hs.wq..hs.wq + s * d], s, d, ni, &mut q[i * s..(i + 1) * s]);
                    matvec(&p[hs.wk..hs.wk + s * d], s, d, ni, &mut k[i * s..(i + 1) * s]);
                    matvec(&p[hs.wv..hs.wv + sv * d], sv, d, ni, &mut v[i * sv..(i + 1) * sv]);
                }
                let mut attn = vec![0.0; t * t];
                let mut o = vec![0.0; t * sv];
                for i in 0..t {
                    let vis = self.visible(i, t);
                    let qi = &q[i * s..(i + 1) * s];
                    for j in vis.clone() {
                        scores[j] = linalg::dot(qi, &k[j * s..(j + 1) * s]);
                    }
                    softmax(&scores[vis.clone()], &mut attn[i * t + vis.start..i * t + vis.end]);
                    let oi = &mut o[i * sv..(i + 1) * sv];
                    for j in vis {
                        let a = attn[i * t + j];
                        for (ov, vv) in oi.iter_mut().zip(&v[j * sv..(j + 1) * sv]) {
                            *ov += a * vv;
                        }
                    }
                    matvec(&p[hs.wo..hs.wo + d * sv], d, sv, oi, &mut tmp);
                    for (xm, tv) in x_mid[i * d..(i + 1) * d].iter_mut().zip(&tmp) {
                        *xm += tv;
                    }
                }
                heads.push(HeadCache { q, k, v, attn, o });
            }
            let mut n2 = vec![0.0; t * d];
            let mut z1 = vec![0.0; t * f];
            let mut h = vec![0.0; t * f];
            let mut out = x_mid.clone();
            for i in 0..t {
                let n2i = &mut n2[i * d..(i + 1) * d];
                c.norm.apply(&x_mid[i * d..(i + 1) * d], n2i);
                let zi = &mut z1[i * f..(i + 1) * f];
                matvec(&p[ls.w1..ls.w1 + f * d], f, d, n2i, zi);
                for (zv, bv) in zi.iter_mut().zip(&p[ls.b1..ls.b1 + f]) {
                    *zv += bv;
                }
                let hi = &mut h[i * f..(i + 1) * f];
                for (hv, zv) in hi.iter_mut().zip(zi.iter()) {
                    *hv = zv.max(0.0);
                }
                matvec(&p[ls.w2..ls.w2 + d * f], d, f, hi, &mut tmp);
                let oi = &mut out[i * d..(i + 1) * d];
                for j in 0..d {
                    oi[j] += tmp[j] + p[ls.b2 + j];
                    if c.mlp_inner_skip {
                        oi[j] += n2i[j];
                    }
                }
            }
            cache.push(LayerCache { n1, heads, x_mid, n2, z1, h });
            x = out;
            activations.push(x.clone());
        }
        let last = x[(t - 1) * d..t * d].to_vec();
        let logits = self.logits_of(&last);
        let mut probs = vec![0.0; c.vocab];
        softmax(&logits, &mut probs);
        Ok(ForwardTrace { activations, last, logits, probs, cache, dim: d })
    }

    /// Accumulates `Fᵀ g` into `out`.
    pub(crate) fn unembed_t_acc(&self, g: &[f64], out: &mut [f64]) {
        let c = &self.cfg;
        matvec_t_acc(&self.params[self.layout.unembed..self.layout.unembed + c.vocab * c.dim], c.vocab, c.dim, g, out);
    }
}
