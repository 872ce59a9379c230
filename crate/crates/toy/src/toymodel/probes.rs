//! Decoding and geometric probes of the embedding space.

use super::linalg::{argmax, dot};
use super::{Input, ToyTransformer};
use crate::{Error, Result};
use accessbound_core::seed;
use rand::Rng;
use std::fmt::Write;

/// Greedy decoding: repeatedly append the argmax token (lowest index on ties).
pub fn greedy_decode(model: &ToyTransformer, prompt: &[Vec<f64>], n: usize) -> Result<Vec<usize>> {
    let mut input = Input { soft: prompt.to_vec(), tokens: Vec::with_capacity(n) };
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let tr = model.forward(&input)?;
        let t = argmax(&tr.logits);
        out.push(t);
        input.tokens.push(t);
    }
    Ok(out)
}

/// The token whose decoder cell contains `x`: `argmax_t (F x)_t`.
pub fn next_token_region(model: &ToyTransformer, x: &[f64]) -> usize {
    argmax(&model.logits_of(x))
}

/// Next-token regions rasterized over the affine plane through three anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneCut {
    pub origin: Vec<f64>,
    /// Orthonormal spanning vectors of the plane.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Plane coordinates `(min_u, max_u, min_v, max_v)` covered by the grid.
    pub extent: (f64, f64, f64, f64),
    pub resolution: usize,
    /// `grid[row][col]`; row 0 is the smallest `v`.
    pub grid: Vec<Vec<usize>>,
    /// Plane coordinates of the anchors.
    pub anchors: Vec<(f64, f64)>,
}

impl PlaneCut {
    fn to_plane(&self, x: &[f64]) -> (f64, f64) {
        let w: Vec<f64> = x.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        (dot(&w, &self.u), dot(&w, &self.v))
    }

    /// The point of the embedding space at plane coordinates `(a, b)`.
    pub fn point(&self, a: f64, b: f64) -> Vec<f64> {
        self.origin.iter().zip(&self.u).zip(&self.v).map(|((o, u), v)| o + a * u + b * v).collect()
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let (u0, u1, v0, v1) = self.extent;
        let r = self.resolution as f64;
        (u0 + (col as f64 + 0.5) * (u1 - u0) / r, v0 + (row as f64 + 0.5) * (v1 - v0) / r)
    }

    /// `(row, col)` of the cell containing the embedding-space point `x`
    /// (after projection onto the plane), if inside the grid.
    pub fn cell_of(&self, x: &[f64]) -> Option<(usize, usize)> {
        let (a, b) = self.to_plane(x);
        let (u0, u1, v0, v1) = self.extent;
        let r = self.resolution as f64;
        let col = ((a - u0) / (u1 - u0) * r).floor();
        let row = ((b - v0) / (v1 - v0) * r).floor();
        (col >= 0.0 && row >= 0.0 && col < r && row < r).then_some((row as usize, col as usize))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,token\n");
        for (r, line) in self.grid.iter().enumerate() {
            for (c, t) in line.iter().enumerate() {
                writeln!(s, "{r},{c},{t}").unwrap();
            }
        }
        s
    }

    /// Self-contained SVG: one rect per cell, anchors as circles, and a colour key.
    pub fn to_svg(&self, pixel: usize) -> String {
        let n = self.resolution;
        let size = n * pixel;
        let mut tokens: Vec<usize> = self.grid.iter().flatten().copied().collect();
        tokens.sort_unstable();
        tokens.dedup();
        let key_h = 16 * tokens.len();
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}">"#, size + 90, size.max(key_h)).unwrap();
        for (r, line) in self.grid.iter().enumerate() {
            for (c, &t) in line.iter().enumerate() {
                // row 0 is the bottom of the picture
                let y = (n - 1 - r) * pixel;
                writeln!(s, r#"<rect x="{}" y="{y}" width="{pixel}" height="{pixel}" fill="{}"/>"#, c * pixel, token_colour(t)).unwrap();
            }
        }
        let (u0, u1, v0, v1) = self.extent;
        for &(a, b) in &self.anchors {
            let x = (a - u0) / (u1 - u0) * size as f64;
            let y = size as f64 - (b - v0) / (v1 - v0) * size as f64;
            writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="black"/>"#).unwrap();
        }
        for (k, t) in tokens.iter().enumerate() {
            let y = 16 * k;
            writeln!(s, r#"<rect x="{}" y="{y}" width="12" height="12" fill="{}"/>"#, size + 8, token_colour(*t)).unwrap();
            writeln!(s, r#"<text x="{}" y="{}" font-size="11">token {t}</text>"#, size + 24, y + 11).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Deterministic, well-spread hue per token.
pub(crate) fn token_colour(t: usize) -> String {
    let hue = (t as f64 * 137.507_764) % 360.0;
    format!("hsl({hue:.1},65%,55%)")
}

/// Rasterizes [`next_token_region`] on a `resolution × resolution` grid over
/// the plane through `anchors`, covering their bounding box with 50% padding.
pub fn plane_cut_map(model: &ToyTransformer, anchors: &[Vec<f64>; 3], resolution: usize) -> Result<PlaneCut> {
    let d = model.config().dim;
    if anchors.iter().any(|a| a.len() != d) {
        return Err(Error::Mismatch(format!("anchors must have dimension {d}")));
    }
    if resolution == 0 {
        return Err(Error::Domain("resolution must be positive".into()));
    }
    let origin = anchors[0].clone();
    let e1: Vec<f64> = anchors[1].iter().zip(&origin).map(|(a, b)| a - b).collect();
    let e2: Vec<f64> = anchors[2].iter().zip(&origin).map(|(a, b)| a - b).collect();
    let scale = dot(&e1, &e1).max(dot(&e2, &e2)).sqrt();
    let n1 = dot(&e1, &e1).sqrt();
    if scale == 0.0 || n1 <= 1e-12 * scale {
        return Err(Error::Degenerate("anchors are not affinely independent".into()));
    }
    let u: Vec<f64> = e1.iter().map(|x| x / n1).collect();
    let proj = dot(&e2, &u);
    let w: Vec<f64> = e2.iter().zip(&u).map(|(a, b)| a - proj * b).collect();
    let n2 = dot(&w, &w).sqrt();
    if n2 <= 1e-12 * scale {
        return Err(Error::Degenerate("anchors are collinear".into()));
    }
    let v: Vec<f64> = w.iter().map(|x| x / n2).collect();
    let pts = [(0.0, 0.0), (n1, 0.0), (proj, n2)];
    let (mut u0, mut u1, mut v0, mut v1) = (0.0f64, n1.max(proj), 0.0f64, n2);
    u0 = u0.min(proj);
    let pad_u = 0.5 * (u1 - u0);
    let pad_v = 0.5 * (v1 - v0);
    u0 -= pad_u;
    u1 += pad_u;
    v0 -= pad_v;
    v1 += pad_v;
    let mut cut = PlaneCut { origin, u, v, extent: (u0, u1, v0, v1), resolution, grid: Vec::new(), anchors: pts.to_vec() };
    cut.grid = (0..resolution)
        .map(|r| {
            (0..resolution)
                .map(|c| {
                    let (a, b) = cut.cell_center(r, c);
                    next_token_region(model, &cut.point(a, b))
                })
                .collect()
        })
        .collect();
    Ok(cut)
}

/// For each prompt length, the largest sup-norm entry of any activation
/// (all layers, all positions) over `samples` prompts of i.i.d. uniform tokens.
pub fn radius_profile(model: &ToyTransformer, lengths: &[usize], samples: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let vocab = model.config().vocab;
    lengths
        .iter()
        .enumerate()
        .map(|(li, &len)| {
            if len == 0 {
                return Err(Error::Domain("prompt lengths must be >= 1".into()));
            }
            let mut rng = seed::rng(seed, li as u64);
            let mut best = 0.0f64;
            for _ in 0..samples {
                let toks: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab)).collect();
                let tr = model.forward(&Input::tokens(toks))?;
                for a in &tr.activations {
                    best = a.iter().fold(best, |m, x| m.max(x.abs()));
                }
            }
            Ok((len, best))
        })
        .collect()
}
