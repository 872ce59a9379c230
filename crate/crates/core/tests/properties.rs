use accessbound_core::bounds::{
    self, count_finite, quantize, slope_ball, slope_ellipsoid, threshold_finite, variable_precision_packing_interval,
    ModelGeometry, PrecisionModel,
};
use accessbound_core::cellvolume::{inaccessibility_threshold, CellVolumeDistribution, MedianMethod};
use accessbound_core::eo::{canonicalize, same_class};
use accessbound_core::geometry::montecarlo::cone_volume_mc;
use accessbound_core::geometry::special::{incomplete_beta, log_beta, log_gamma};
use accessbound_core::geometry::{volume_ball, volume_cone, Norm, SupportGeometry};
use accessbound_core::measures::{perm_distance, wasserstein_empirical, Solver};
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn log_gamma_agrees_with_statrs() {
    let mut x = 1e-3;
    while x < 1e6 {
        let ours = log_gamma(x).unwrap();
        let theirs = statrs::function::gamma::ln_gamma(x);
        if ours.abs() > 1e-2 {
            assert!((ours - theirs).abs() / ours.abs() < 1e-12, "x={x}: {ours} vs {theirs}");
        } else {
            // near the roots at 1 and 2 only absolute accuracy is meaningful
            assert!((ours - theirs).abs() < 1e-14, "x={x}");
        }
        x *= 1.013;
    }
}

#[test]
fn incomplete_beta_agrees_with_statrs_regularized() {
    for &(a, b) in &[(0.5, 1.5), (2.0, 3.0), (0.5, 50.5), (384.5, 0.5), (7.0, 7.0)] {
        for i in 1..20 {
            let x = i as f64 / 20.0;
            let ours = incomplete_beta(x, a, b).unwrap();
            let theirs = statrs::function::beta::beta_reg(a, b, x) * log_beta(a, b).unwrap().exp();
            if theirs > 1e-280 {
                assert!((ours - theirs).abs() / theirs < 1e-10, "x={x} a={a} b={b}: {ours} vs {theirs}");
            }
        }
    }
}

#[test]
fn cone_volume_matches_rejection_sampling() {
    for &d in &[2usize, 3, 5] {
        for &angle in &[0.5, 1.0, 2.0] {
            let est = cone_volume_mc(d, 1.0, angle, 200_000, 17, 4).unwrap();
            let closed = volume_cone(d, 1.0, angle).unwrap().exp();
            assert!((est.value - closed).abs() <= 3.0 * est.std_err, "d={d} angle={angle}: {} vs {closed}", est.value);
        }
    }
}

/// Count points of the grid with spacing `2^{j-12}` on each binade `[2^j, 2^{j+1})`
/// that fall inside `[lo, hi)`.
fn enumerate_grid(lo: f64, hi: f64) -> u64 {
    let mut count = 0;
    let mut j = lo.log2().floor() as i32;
    while 2f64.powi(j) < hi {
        let step = 2f64.powi(j - 12);
        for k in 0..4096 {
            let v = 2f64.powi(j) + k as f64 * step;
            if v >= lo && v < hi {
                count += 1;
            }
        }
        j += 1;
    }
    count
}

#[test]
fn variable_precision_bound_matches_enumeration_on_dyadic_intervals() {
    for a in -3..=3 {
        for b in a..=3 {
            let (lo, hi) = (2f64.powi(a), 2f64.powi(b));
            let bound = variable_precision_packing_interval(lo, hi).unwrap();
            assert_eq!(bound, enumerate_grid(lo, hi) as f64, "a={a} b={b}");
        }
    }
    assert_eq!(enumerate_grid(1.0, 4.0), 8192);
}

#[test]
fn variable_precision_bound_covers_true_half_precision_values() {
    // fp16 normal numbers in [1, 4]: 1024 per binade plus the endpoint
    let fp16 = 2 * 1024 + 1;
    assert!(variable_precision_packing_interval(1.0, 4.0).unwrap() >= fp16 as f64);
}

#[test]
fn dirac_threshold_matches_finite_threshold() {
    let mut state = 0x1234_5678u64;
    let mut next = || {
        state = accessbound_core::seed::derive(state, 1);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..20 {
        let dim = 1 + (next() * 20.0) as usize;
        let vocab = 2 + (next() * 1000.0) as u64;
        let r = 0.1 + next() * 10.0;
        let eps = 10f64.powf(-3.0 * next());
        let m = 1 + (next() * 4.0) as usize;
        let g = bounds::uniform_ball(dim, vocab, r, eps, Some(m)).unwrap();
        let t = threshold_finite(&g).unwrap();
        let dist = CellVolumeDistribution::dirac(vocab).unwrap();
        let lp = count_finite(&g).unwrap().ln();
        let n = inaccessibility_threshold(&dist, lp, MedianMethod::Exact, u64::MAX).unwrap().n;
        assert_eq!(n, t.ceil() as u64, "dim={dim} vocab={vocab} r={r} eps={eps} m={m}");
    }
}

fn seq_strategy(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn quantize_is_idempotent(values in prop::collection::vec(-100.0..100.0f64, 1..40), eps in 1e-3..2.0f64) {
        let once = quantize(&values, eps).unwrap();
        let twice = quantize(&once, eps).unwrap();
        prop_assert_eq!(&once, &twice);
        for (q, v) in once.iter().zip(&values) {
            prop_assert!(*q <= *v && v - q < eps * (1.0 + 1e-12));
        }
    }

    #[test]
    fn incomplete_beta_nondecreasing(a in 0.1..20.0f64, b in 0.1..20.0f64, x in 0.0..0.99f64, dx in 0.0..0.01f64) {
        let lo = incomplete_beta(x, a, b).unwrap();
        let hi = incomplete_beta(x + dx, a, b).unwrap();
        prop_assert!(hi >= lo * (1.0 - 1e-12));
    }

    #[test]
    fn cone_homogeneity(d in 2usize..200, angle in 0.05..3.1f64, r in 0.1..10.0f64) {
        for lambda in [0.5, 2.0, 10.0] {
            let diff = volume_cone(d, lambda * r, angle).unwrap() - volume_cone(d, r, angle).unwrap();
            prop_assert!((diff - d as f64 * f64::ln(lambda)).abs() < 1e-9 * (1.0 + diff.abs()));
        }
    }

    #[test]
    fn cone_inside_half_ball(d in 2usize..1000, angle in 0.01..PI) {
        let half = volume_ball(d, 1.0, Norm::L2).unwrap() - 2f64.ln();
        prop_assert!(volume_cone(d, 1.0, angle).unwrap() <= half + 1e-12);
    }

    #[test]
    fn ellipsoid_slope_at_most_ball(d in 1usize..10, r in 0.1..5.0f64, fracs in prop::collection::vec(0.01..1.0f64, 10)) {
        let ball = bounds::uniform_ball(d, 16, r, 0.01, None).unwrap();
        let mins: Vec<f64> = (0..d).map(|i| -r * fracs[i]).collect();
        let maxs: Vec<f64> = (0..d).map(|i| r * fracs[i]).collect();
        let boxed = ModelGeometry {
            support: SupportGeometry::boxed(mins, maxs).unwrap(),
            precision: PrecisionModel::Uniform { epsilon: 0.01 },
            ..ball.clone()
        };
        prop_assert!(slope_ellipsoid(&boxed).unwrap().slope <= slope_ball(&ball).unwrap().slope + 1e-12);
    }

    #[test]
    fn canonicalize_is_idempotent_and_related(x in prop::collection::vec(0u64..50, 1..6), k in 1u64..7) {
        prop_assume!(x.iter().any(|&v| v > 0));
        let c = canonicalize(&x).unwrap();
        prop_assert_eq!(canonicalize(&c).unwrap(), c.clone());
        prop_assert!(same_class(&x, &c).unwrap());
        let scaled: Vec<u64> = x.iter().map(|v| v * k).collect();
        prop_assert_eq!(canonicalize(&scaled).unwrap(), c);
    }

    #[test]
    fn assignment_matches_exhaustive((x, y) in (1usize..=7, 1usize..4).prop_flat_map(|(n, d)| (seq_strategy(n, d), seq_strategy(n, d))),
                                     q in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0, f64::INFINITY]),
                                     linf in any::<bool>()) {
        let ground = if linf { Norm::Linf } else { Norm::L2 };
        let a = perm_distance(&x, &y, q, ground, Solver::Assignment).unwrap();
        let b = perm_distance(&x, &y, q, ground, Solver::Exhaustive).unwrap();
        prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn metric_axioms((x, y, z) in (1usize..=6).prop_flat_map(|n| (seq_strategy(n, 2), seq_strategy(n, 2), seq_strategy(n, 2))),
                     q in prop::sample::select(vec![1.0, 2.0, f64::INFINITY])) {
        let w = |a: &[Vec<f64>], b: &[Vec<f64>]| wasserstein_empirical(a, b, q, Norm::L2, Solver::Assignment).unwrap();
        prop_assert!(w(&x, &y) >= 0.0);
        prop_assert!((w(&x, &y) - w(&y, &x)).abs() < 1e-10);
        prop_assert!(w(&x, &z) <= w(&x, &y) + w(&y, &z) + 1e-10);
    }

    #[test]
    fn permutation_invariance(x in seq_strategy(6, 3), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        for q in [1.0, 2.0, f64::INFINITY] {
            prop_assert!(wasserstein_empirical(&x, &xp, q, Norm::L2, Solver::Assignment).unwrap() < 1e-12);
        }
    }

    #[test]
    fn scaled_distance_grows_with_q((x, y) in (1usize..=6).prop_flat_map(|n| (seq_strategy(n, 2), seq_strategy(n, 2)))) {
        // W_q is a power mean of matched costs, so it is nondecreasing in q up to W_∞ = d_∞
        let mut prev = 0.0;
        for q in [1.0, 1.5, 2.0, 4.0, 8.0, f64::INFINITY] {
            let w = wasserstein_empirical(&x, &y, q, Norm::L2, Solver::Assignment).unwrap();
            prop_assert!(w >= prev - 1e-10, "q={} w={} prev={}", q, w, prev);
            prev = w;
        }
    }
}

#[test]
fn cone_volume_near_pi_is_half_ball_in_high_dimension() {
    let half = volume_ball(768, 63.62, Norm::L2).unwrap() - 2f64.ln();
    let cone = volume_cone(768, 63.62, PI - 1e-10).unwrap();
    assert!((cone - half).abs() < 1e-6);
}
