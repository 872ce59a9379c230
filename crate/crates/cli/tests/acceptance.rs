//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines are never captured.

use accessbound_core::bounds::{
    bundled_model, count_finite, slope_ball, threshold_finite, uniform_ball, variable_precision_packing_interval, PrecisionModel,
};
use accessbound_core::cellvolume::{convolve_median, inaccessibility_threshold, CellVolumeDistribution, MedianMethod};
use accessbound_core::eo::{basis_radius, verify_density, BasisVariant, EoParams};
use accessbound_core::geometry::montecarlo::cone_volume_mc;
use accessbound_core::geometry::packing::{interval_packing_exact, interval_packing_grid, max_separated_1d, max_separated_exhaustive};
use accessbound_core::geometry::{packing_bounds_ball, volume_cone, Norm};
use accessbound_core::{seed, Error};
use accessbound_toy::experiments::presets::{copy_config, copy_model, cram_grid_config, cram_model, cram_study, CramStudy};
use accessbound_toy::experiments::{copy_eval, copy_finetune, CopyEval};
use accessbound_toy::toymodel::check::{duplication_residual, gradient_check, permutation_residual};
use accessbound_toy::toymodel::{softmax, InitScales, NormKind, Positional};
use accessbound_toy::{ToyConfig, ToyTransformer};
use rand::Rng;
use std::f64::consts::PI;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn geometry_oracles() -> Outcome {
    let t = Instant::now();
    let mut worst_closed = 0.0f64;
    for delta in [0.2, 1.0, 2.0, 3.0] {
        let oracle = 2.0 * PI / 3.0 * (1.0 - (delta / 2.0f64).cos());
        let v = volume_cone(3, 1.0, delta).unwrap().exp();
        worst_closed = worst_closed.max(((v - oracle) / oracle).abs());
    }
    let mut worst_z = 0.0f64;
    for d in [2usize, 3, 5] {
        for delta in [0.5, 1.0, 2.0] {
            let mc = cone_volume_mc(d, 1.0, delta, 1_000_000, seed::derive(1, d as u64 * 10 + (delta * 2.0) as u64), 8).unwrap();
            let v = volume_cone(d, 1.0, delta).unwrap().exp();
            worst_z = worst_z.max((mc.value - v).abs() / mc.std_err);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst_closed <= 1e-9 && worst_z <= 3.0 && secs < 60.0,
        format!("closed form rel err {worst_closed:.1e}, worst MC deviation {worst_z:.2} SE, {secs:.1} s"),
    )
}

fn packing_sanity() -> Outcome {
    let mut rng = seed::rng(2, 0);
    let mut cases: Vec<(f64, f64)> = vec![(1.0, 1.0)];
    while cases.len() < 20 {
        cases.push((rng.gen_range(0.1..5.0), rng.gen_range(0.05..2.0)));
    }
    let mut failures = Vec::new();
    for &(r, eps) in &cases {
        let exact = interval_packing_exact(r, eps);
        // refine the grid until greedy reaches the closed form, which it can never exceed
        let mut brute = 0;
        for cells in [64, 256, 1024, 4096, 16384, 65536] {
            brute = brute.max(interval_packing_grid(r, eps, cells));
        }
        // exhaustive subset search on a coarse grid agrees with greedy
        let coarse: Vec<f64> = (0..=14).map(|i| -r + i as f64 * 2.0 * r / 14.0).collect();
        let pts: Vec<Vec<f64>> = coarse.iter().map(|&x| vec![x]).collect();
        let exhaustive = max_separated_exhaustive(&pts, eps, Norm::L2).unwrap();
        let b = packing_bounds_ball(1, r, eps).unwrap();
        let (lo, hi) = (b.log_lower.exp(), b.log_upper.exp());
        let ok = brute == exact && exhaustive == max_separated_1d(&coarse, eps) && lo <= exact as f64 + 1e-9 && exact as f64 <= hi + 1e-9;
        if !ok {
            failures.push(format!("r={r:.3} eps={eps:.3}: brute {brute} exact {exact} bounds [{lo:.3}, {hi:.3}]"));
        }
    }
    let unit = interval_packing_exact(1.0, 1.0);
    let b = packing_bounds_ball(1, 1.0, 1.0).unwrap();
    let unit_ok = unit == 2 && (b.log_lower.exp() - 1.0).abs() < 1e-12 && (b.log_upper.exp() - 3.0).abs() < 1e-12;
    outcome(
        failures.is_empty() && unit_ok,
        if failures.is_empty() { format!("20 pairs ok, r = eps = 1 gives {unit} within [1, 3]") } else { failures.join("; ") },
    )
}

fn bound_formulas() -> Outcome {
    // d ln(1 + 2r/eps) / ln|V| at eps = 2^-10, evaluated with 40 significant digits
    let oracles = [("pythia-160m", 835.515_950_373_877_4), ("qwen2.5-0.5b", 1_003.144_621_406_973_1)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, oracle) in oracles {
        let m = bundled_model(name).unwrap();
        let g = m.ball_geometry().unwrap();
        assert_eq!(g.precision, PrecisionModel::FloatScaled { significand_bits: 11 });
        let c = slope_ball(&g).unwrap().slope;
        let rel = ((c - oracle) / oracle).abs();
        pass &= rel <= 1e-6;
        parts.push(format!("{name} C_ball {c:.4} (rel err {rel:.1e})"));
    }
    outcome(pass, parts.join(", "))
}

/// Grid points with spacing `2^{j-12}` on each binade `[2^j, 2^{j+1})` inside `[lo, hi)`.
fn enumerate_grid(lo: f64, hi: f64) -> u64 {
    let mut count = 0;
    let mut j = lo.log2().floor() as i32;
    while 2f64.powi(j) < hi {
        let step = 2f64.powi(j - 12);
        count += (0..4096).map(|k| 2f64.powi(j) + k as f64 * step).filter(|&v| v >= lo && v < hi).count() as u64;
        j += 1;
    }
    count
}

fn variable_precision() -> Outcome {
    let mut bad = Vec::new();
    for a in -3..=3 {
        for b in a..=3 {
            let (lo, hi) = (2f64.powi(a), 2f64.powi(b));
            let bound = variable_precision_packing_interval(lo, hi).unwrap();
            if bound != enumerate_grid(lo, hi) as f64 {
                bad.push(format!("[2^{a}, 2^{b}]"));
            }
        }
    }
    let example = variable_precision_packing_interval(1.0, 4.0).unwrap();
    outcome(bad.is_empty() && example == 8192.0, format!("28 intervals, [1,4] -> {example}; mismatches: {}", bad.len()))
}

fn toy_invariants() -> Outcome {
    let t = Instant::now();
    let mut rng = seed::rng(5, 0);
    let soft = |d: usize, m: usize, s: f64, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..m).map(|_| (0..d).map(|_| rng.gen_range(-s..s)).collect()).collect()
    };
    let mut worst_inv = 0.0f64;
    for k in 0..5 {
        let cfg = ToyConfig { causal: false, ..ToyConfig::new(7, 6, 2, 3) };
        let model = ToyTransformer::random(cfg, &InitScales::default(), &mut seed::rng(50, k)).unwrap();
        let x = soft(6, 5, 3.0, &mut rng);
        worst_inv = worst_inv.max(permutation_residual(&model, &x, &[3, 1, 0, 2]).unwrap());
        worst_inv = worst_inv.max(duplication_residual(&model, &x).unwrap());
    }
    let mut worst_grad = 0.0f64;
    for k in 0..10u64 {
        let cfg = ToyConfig {
            norm: [NormKind::LinfProjection, NormKind::Rms, NormKind::None][k as usize % 3],
            causal: k % 2 == 0,
            mlp_inner_skip: k % 4 == 1,
            positional: if k % 5 == 3 { Positional::Learned { max_len: 8 } } else { Positional::None },
            ..ToyConfig::new(5, 4, 2, 2)
        };
        let mut r = seed::rng(60, k);
        let model = ToyTransformer::random(cfg, &InitScales::default(), &mut r).unwrap();
        let prompt = soft(4, 3, 1.5, &mut r);
        let targets: Vec<usize> = (0..4).map(|_| r.gen_range(0..5)).collect();
        worst_grad = worst_grad.max(gradient_check(&model, &prompt, &targets, 1e-4).unwrap().worst_rel_error);
    }
    let mut worst_softmax = 0.0f64;
    for k in 0..1000 {
        let scale = [1.0, 30.0, 700.0][k % 3];
        let z: Vec<f64> = (0..1 + k % 50).map(|_| rng.gen_range(-scale..scale)).collect();
        let mut p = vec![0.0; z.len()];
        softmax(&z, &mut p);
        worst_softmax = worst_softmax.max((p.iter().sum::<f64>() - 1.0).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst_inv < 1e-9 && worst_grad <= 1e-5 && worst_softmax <= 1e-12 && secs < 30.0,
        format!("invariance residual {worst_inv:.1e}, gradient rel err {worst_grad:.1e}, softmax {worst_softmax:.1e}, {secs:.1} s"),
    )
}

/// Serialized outputs of the cell-volume criterion, for the determinism check.
fn cell_volume_run() -> (bool, String, String) {
    let mut next = {
        let mut state = 0x00c0_ffeeu64;
        move || {
            state = seed::derive(state, 1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        }
    };
    let mut dirac_ok = 0;
    let mut log = String::new();
    for _ in 0..20 {
        let dim = 1 + (next() * 20.0) as usize;
        let vocab = 2 + (next() * 5000.0) as u64;
        let r = 0.1 + next() * 10.0;
        let eps = 10f64.powf(-3.0 * next());
        let m = 1 + (next() * 4.0) as usize;
        let g = uniform_ball(dim, vocab, r, eps, Some(m)).unwrap();
        let th = threshold_finite(&g).unwrap();
        let res = inaccessibility_threshold(&CellVolumeDistribution::dirac(vocab).unwrap(), count_finite(&g).unwrap().ln(), MedianMethod::Exact, u64::MAX)
            .unwrap();
        dirac_ok += usize::from(res.n == th.ceil() as u64);
        log.push_str(&format!("{}\n", res.n));
    }
    let two = CellVolumeDistribution::from_atoms(&[0.5, 0.25], &[0.5, 0.5]).unwrap();
    let exact = convolve_median(&two, 2, MedianMethod::Exact).unwrap();
    let mc = convolve_median(&two, 2, MedianMethod::MonteCarlo { samples: 100_000, seed: 6 }).unwrap();
    let exact_is_eighth = (exact.log_median - 0.125f64.ln()).abs() < 1e-12;
    let inside = mc.log_ci_low <= exact.log_median && exact.log_median <= mc.log_ci_high;
    log.push_str(&serde_json::to_string(&(exact, mc)).unwrap());
    let detail = format!(
        "Dirac {dirac_ok}/20 exact, two-atom median {:.6} with MC CI [{:.6}, {:.6}]",
        exact.log_median.exp(),
        mc.log_ci_low.exp(),
        mc.log_ci_high.exp()
    );
    (dirac_ok == 20 && exact_is_eighth && inside, detail, log)
}

fn elementary_operations() -> Outcome {
    let t = Instant::now();
    let (mut checked, mut skipped, mut failed) = (0, 0, Vec::new());
    for p in 1..=3u64 {
        for d in [2usize, 3] {
            let params = EoParams::new(p, d).unwrap();
            for variant in [BasisVariant::Coarse, BasisVariant::Improved] {
                match basis_radius(params, variant) {
                    Err(Error::Degenerate(_)) => skipped += 1,
                    Err(e) => failed.push(format!("p={p} D={d}: {e}")),
                    Ok(_) => {
                        let rep = verify_density(params, variant, 30).unwrap();
                        checked += 1;
                        if !rep.passed() {
                            failed.push(format!("p={p} D={d} {variant:?}"));
                        }
                    }
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        failed.is_empty() && secs < 120.0,
        format!("{checked} combinations verified, {skipped} undefined, violations in {:?}, {secs:.1} s", failed),
    )
}

const SUPPORT_SAMPLES: usize = 2000;
const CRAM_MODEL_SEED: u64 = 0;
const CRAM_SEED: u64 = 1;

fn cram_run() -> CramStudy {
    let model = cram_model(CRAM_MODEL_SEED).unwrap();
    cram_study(&model, &cram_grid_config(CRAM_SEED), SUPPORT_SAMPLES, PrecisionModel::FloatScaled { significand_bits: 11 }).unwrap()
}

fn cramming(study: &CramStudy, secs: f64) -> Outcome {
    let mut r2: Vec<f64> = study.fits.iter().map(|f| f.map_or(f64::NEG_INFINITY, |f| f.r2)).collect();
    r2.sort_by(f64::total_cmp);
    let median_r2 = 0.5 * (r2[(r2.len() - 1) / 2] + r2[r2.len() / 2]);
    let n50: Vec<Option<f64>> = study.fits.iter().map(|f| f.and_then(|f| f.n50)).collect();
    let all_n50 = n50.iter().all(Option::is_some);
    let monotone = all_n50 && n50.windows(2).all(|w| w[1].unwrap() >= w[0].unwrap());
    let line_r2 = study.line.map_or(f64::NEG_INFINITY, |l| l.r2);
    let ratio = study.ratio.unwrap_or(f64::NAN);
    let n50_text: Vec<String> = n50.iter().map(|n| n.map_or("-".into(), |v| format!("{v:.2}"))).collect();
    outcome(
        median_r2 >= 0.8 && monotone && line_r2 >= 0.9 && ratio > 1.0 && secs < 1800.0,
        format!(
            "median sigmoid R2 {median_r2:.3}, n50 [{}], line R2 {line_r2:.3}, C_emp {:.3}, slope_ball {:.3}, ratio {ratio:.2}, {secs:.0} s",
            n50_text.join(", "),
            study.line.map_or(f64::NAN, |l| l.slope),
            study.support.slope_ball,
        ),
    )
}

const COPY_SEED: u64 = 0;

fn copy_run() -> (ToyTransformer, CopyEval) {
    let (model, _) = copy_finetune(copy_model(COPY_SEED).unwrap(), &copy_config(COPY_SEED)).unwrap();
    let eval = copy_eval(&model, &(1..=32).collect::<Vec<_>>(), 64, seed::derive(COPY_SEED, 2)).unwrap();
    (model, eval)
}

fn copying(eval: &CopyEval, secs: f64) -> Outcome {
    let trained = 12;
    let pairs: Vec<(usize, f64)> = eval.lengths.iter().copied().zip(eval.accuracy.iter().copied()).collect();
    let min_in = pairs.iter().filter(|p| p.0 <= trained).map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_out = pairs.iter().filter(|p| p.0 > 2 * trained).map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let r2 = eval.fit.map_or(f64::NEG_INFINITY, |f| f.r2);
    outcome(
        min_in >= 0.9 && max_out <= 0.5 && r2 >= 0.85 && secs < 1800.0,
        format!(
            "min accuracy at n <= 12 {min_in:.3}, max at n > 24 {max_out:.3}, sigmoid R2 {r2:.3}, transition {:.2}, {secs:.0} s",
            eval.transition_length.unwrap_or(f64::NAN)
        ),
    )
}

fn report(results: &mut Vec<(usize, Outcome)>, id: usize, o: Outcome) {
    println!("criterion {id:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    results.push((id, o));
}

fn main() {
    // `cargo test -- --list` and filters are harness conventions; honour listing only
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut results = Vec::new();
    report(&mut results, 1, geometry_oracles());
    report(&mut results, 2, packing_sanity());
    report(&mut results, 3, bound_formulas());
    report(&mut results, 4, variable_precision());
    report(&mut results, 5, toy_invariants());
    let (cell_ok, cell_detail, cell_log) = cell_volume_run();
    report(&mut results, 6, outcome(cell_ok, cell_detail));
    report(&mut results, 7, elementary_operations());

    let t = Instant::now();
    let study = cram_run();
    report(&mut results, 8, cramming(&study, t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let (copy_model_a, eval) = copy_run();
    report(&mut results, 9, copying(&eval, t.elapsed().as_secs_f64()));

    let same_cells = cell_volume_run().2 == cell_log;
    let same_cram = serde_json::to_string(&cram_run()).unwrap() == serde_json::to_string(&study).unwrap();
    let (copy_model_b, eval_b) = copy_run();
    let same_copy = copy_model_a.params() == copy_model_b.params()
        && serde_json::to_string(&eval).unwrap() == serde_json::to_string(&eval_b).unwrap()
        && eval.to_csv() == eval_b.to_csv();
    report(
        &mut results,
        10,
        outcome(
            same_cells && same_cram && same_copy,
            format!("identical reruns: cell volume {same_cells}, cramming {same_cram}, copying {same_copy}"),
        ),
    );

    let failed: Vec<usize> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
