//! Rejection-sampling volume estimates, used as an independent check of the
//! closed-form cone volume.

use crate::{seed, Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub samples: u64,
    pub hits: u64,
}

/// Estimate the volume of `{x in [-h, h]^d : accept(x)}` with `samples`
/// uniform draws split over `shards` independent streams.
///
/// Deterministic for a fixed `(seed, shards)` pair; hit counts are integers,
/// so the merge does not depend on scheduling.
pub fn box_rejection_volume<F>(dim: usize, half_width: f64, samples: u64, seed: u64, shards: u64, accept: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    if dim == 0 || samples == 0 || shards == 0 || !(half_width > 0.0) {
        return Err(Error::Domain("need dim, samples, shards >= 1 and a positive half-width".into()));
    }
    let hits: u64 = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let n = samples / shards + u64::from(shard < samples % shards);
            let mut rng = seed::rng(seed, shard);
            let mut x = vec![0.0; dim];
            let mut hits = 0u64;
            for _ in 0..n {
                for v in x.iter_mut() {
                    *v = rng.gen_range(-half_width..half_width);
                }
                hits += u64::from(accept(&x));
            }
            hits
        })
        .sum();
    let p = hits as f64 / samples as f64;
    let box_volume = (2.0 * half_width).powi(dim as i32);
    Ok(McEstimate {
        value: box_volume * p,
        std_err: box_volume * (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        hits,
    })
}

/// Monte-Carlo volume of the cone `C_{δ,r}` with axis `e_1`.
pub fn cone_volume_mc(dim: usize, radius: f64, angle: f64, samples: u64, seed: u64, shards: u64) -> Result<McEstimate> {
    let cos_half = (0.5 * angle).cos();
    let r2 = radius * radius;
    box_rejection_volume(dim, radius, samples, seed, shards, |x| {
        let n2: f64 = x.iter().map(|v| v * v).sum();
        n2 <= r2 && x[0] >= n2.sqrt() * cos_half
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_area_within_error() {
        let est = box_rejection_volume(2, 1.0, 200_000, 11, 4, |x| x[0] * x[0] + x[1] * x[1] <= 1.0).unwrap();
        assert!((est.value - PI).abs() < 4.0 * est.std_err);
    }

    #[test]
    fn deterministic_per_seed_and_shards() {
        let a = cone_volume_mc(3, 1.0, 1.0, 50_000, 5, 3).unwrap();
        let b = cone_volume_mc(3, 1.0, 1.0, 50_000, 5, 3).unwrap();
        assert_eq!(a, b);
        let c = cone_volume_mc(3, 1.0, 1.0, 50_000, 6, 3).unwrap();
        assert_ne!(a.hits, c.hits);
    }

    #[test]
    fn rejects_empty_requests() {
        assert!(cone_volume_mc(3, 1.0, 1.0, 0, 1, 1).is_err());
        assert!(cone_volume_mc(3, 1.0, 1.0, 10, 1, 0).is_err());
    }
}
