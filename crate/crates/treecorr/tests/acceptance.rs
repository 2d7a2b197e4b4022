//! End-to-end acceptance suite. Each test covers one numbered criterion and
//! prints one PASS/FAIL line per clause plus an overall line (visible with
//! `cargo test --test acceptance -- --nocapture`).

mod common;

use rayon::prelude::*;
use treecorr::align::{error_fraction, mpalign, overlap};
use treecorr::likelihood::likelihood_ratio;
use treecorr::likelihood::LRCache;
use treecorr::sampling::{
    sample_cer, sample_er, sample_ind_pair, ModelParams, TreeParams,
};
use treecorr::seeding::derive_rng;
use treecorr::spectral::{
    second_moment_exact, verify_diagonalization, verify_orthogonality, Caps,
};
use treecorr::testing::{
    build_z_reference, calibrate_threshold, estimate_corr_acceptance, estimate_kl,
    estimate_z_mean, TestSpec,
};
use treecorr::treespace::{
    count_by_size, enumerate_trees, otter_ratio_corrected, TreeArena, OTTER_ALPHA,
};

/// Prints one line per clause and an overall line; returns overall success.
fn report(criterion: &str, clauses: &[(String, bool)]) -> bool {
    let ok = clauses.iter().all(|(_, pass)| *pass);
    for (name, pass) in clauses {
        println!("criterion {criterion} [{name}]: {}", if *pass { "PASS" } else { "FAIL" });
    }
    println!("criterion {criterion}: {}", if ok { "PASS" } else { "FAIL" });
    ok
}

/// Deterministic parallel Monte-Carlo mean ± SE.
fn mc_mean<F: Fn(u64) -> f64 + Sync + Send>(n: u64, f: F) -> (f64, f64) {
    let xs: Vec<f64> = (0..n).into_par_iter().map(f).collect();
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

#[test]
fn criterion_1_tree_counting() {
    let arena = TreeArena::new();
    let expected: [u64; 8] = [1, 1, 2, 4, 9, 20, 48, 115];

    // DP table against the frozen exact counts.
    let dp = count_by_size(8, 8);
    let dp_ok = (1..=8).all(|n| dp[n].to_string() == expected[n - 1].to_string());

    // Independent path: explicit enumeration, grouped by size.
    let all = enumerate_trees(8, 8, &arena);
    let mut by_size = [0u64; 9];
    for t in all {
        by_size[arena.size(t) as usize] += 1;
    }
    let enum_ok = (1..=8).all(|n| by_size[n] == expected[n - 1]);

    // Growth-ratio estimate reaches the reciprocal radius within 2% by n=25.
    let ratios = otter_ratio_corrected(25);
    let target = 1.0 / OTTER_ALPHA;
    let ratio_dev = (ratios[24] - target).abs() / target;

    let ok = report(
        "1 (tree counting)",
        &[
            ("count table matches frozen values n ≤ 8".into(), dp_ok),
            ("enumeration matches frozen values n ≤ 8".into(), enum_ok),
            (format!("growth ratio within 2% at n = 25 (dev {ratio_dev:.5})"), ratio_dev < 0.02),
        ],
    );
    assert!(ok);
}

#[test]
fn criterion_2_likelihood_ratio_oracle() {
    let arena = TreeArena::new();
    let mut clauses = Vec::new();
    for (lambda, s, sp) in [(1.5, 0.8, 0.6), (0.7, 1.0, 0.5), (1.2, 0.9, 0.9)] {
        let tp = TreeParams::new(lambda, s, sp).unwrap();
        let cache = LRCache::new(tp);
        let mut law = common::BruteForceLaw::new(tp, &arena);
        let mut worst = 0.0f64;
        for d in 0..=2u32 {
            let trees = enumerate_trees(d, 4, &arena);
            for &t in &trees {
                for &t_prime in &trees {
                    let brute = law.ratio(t, t_prime, d);
                    let fast = likelihood_ratio(t, t_prime, d, &cache, &arena).unwrap().to_f64();
                    let denom = brute.abs().max(1e-300);
                    if brute == 0.0 {
                        worst = worst.max(fast.abs());
                    } else {
                        worst = worst.max((fast - brute).abs() / denom);
                    }
                }
            }
        }
        clauses.push((
            format!("recursive = brute force at λ={lambda}, s={s}, s'={sp} (worst rel {worst:.2e})"),
            worst < 1e-9,
        ));
    }
    let ok = report("2 (likelihood-ratio definition oracle)", &clauses);
    assert!(ok);
}

#[test]
fn criterion_3_martingale_mean() {
    let arena = TreeArena::new();
    let mut clauses = Vec::new();
    for (pt, (lambda, s, sp)) in [(0u64, (1.2, 0.5, 0.5)), (1, (1.0, 0.5, 0.4))] {
        let tp = TreeParams::new(lambda, s, sp).unwrap();
        let cache = LRCache::new(tp);
        for d in 1..=3u32 {
            let n = 100_000u64;
            let (mean, se) = mc_mean(n, |i| {
                let mut rng = derive_rng(1000 + pt, u64::from(d), i);
                let (t, t_prime) = sample_ind_pair(&tp, d, &mut rng, &arena).unwrap();
                likelihood_ratio(t, t_prime, d, &cache, &arena).unwrap().to_f64()
            });
            let dev = (mean - 1.0).abs();
            clauses.push((
                format!("E[L_{d}] = 1 under the independent law at λ={lambda}, s={s}, s'={sp} ({mean:.5} ± {se:.5})"),
                dev <= 4.0 * se,
            ));
        }
    }
    let ok = report("3 (martingale mean)", &clauses);
    assert!(ok);
}

#[test]
fn criterion_4_second_moment() {
    let arena = TreeArena::new();
    let mut clauses = Vec::new();

    // Depth 1: geometric series, 12 digits.
    for ss in [0.2, 0.5, 0.8] {
        let (v, tail) = second_moment_exact(1, ss, 400).unwrap();
        let target = 1.0 / (1.0 - ss);
        let dev = (v - target).abs() / target;
        clauses.push((
            format!("depth-1 series = 1/(1−ss') at ss'={ss} (rel {dev:.2e})"),
            dev < 1e-12 && tail < 1e-12,
        ));
    }

    // Depth 2 at ss' = 0.2, λ = 1: series vs Monte Carlo.
    let s = 0.2f64.sqrt();
    let tp = TreeParams::new(1.0, s, s).unwrap();
    let cache = LRCache::new(tp);
    let (series, tail) = second_moment_exact(2, 0.2, 400).unwrap();
    let (mc, se) = mc_mean(200_000, |i| {
        let mut rng = derive_rng(2000, 0, i);
        let (t, t_prime) = sample_ind_pair(&tp, 2, &mut rng, &arena).unwrap();
        let l = likelihood_ratio(t, t_prime, 2, &cache, &arena).unwrap().to_f64();
        l * l
    });
    let dev = (mc - series).abs();
    clauses.push((
        format!("depth-2 series {series:.6} vs Monte-Carlo {mc:.6} ± {se:.6}"),
        dev <= 4.0 * se + tail,
    ));

    let ok = report("4 (second-moment identity)", &clauses);
    assert!(ok);
}

#[test]
fn criterion_5_diagonalization_and_orthogonality() {
    let arena = TreeArena::new();
    let mut clauses = Vec::new();

    // Depth-1 orthogonality to 1e-8 at μ ≤ 1.
    for mu in [0.5, 1.0] {
        let r = verify_orthogonality(1, mu, Caps { beta_size_cap: 4, t_size_cap: 40 }, &arena)
            .unwrap();
        clauses.push((
            format!("depth-1 orthogonality at μ={mu} (dev {:.2e})", r.max_deviation),
            r.max_deviation < 1e-8 && r.all_within_budget,
        ));
    }
    // Depth-2 orthogonality within its truncation budget.
    for mu in [0.5, 1.0] {
        let r = verify_orthogonality(2, mu, Caps { beta_size_cap: 3, t_size_cap: 8 }, &arena)
            .unwrap();
        clauses.push((
            format!("depth-2 orthogonality within budget at μ={mu} (dev {:.2e})", r.max_deviation),
            r.all_within_budget,
        ));
    }
    // Diagonalization sweeps at ss' ≤ 0.25, μ ≤ 1.
    for (lambda, s, sp) in [(1.0, 0.5, 0.5), (1.5, 0.4, 0.5), (1.2, 0.3, 0.6)] {
        let tp = TreeParams::new(lambda, s, sp).unwrap();
        let cache = LRCache::new(tp);
        for d in 0..=2u32 {
            let caps = if d == 2 {
                Caps { beta_size_cap: 8, t_size_cap: 6 }
            } else {
                Caps { beta_size_cap: 26, t_size_cap: 26 }
            };
            let r = verify_diagonalization(d, &tp, caps, &cache, &arena).unwrap();
            clauses.push((
                format!(
                    "diagonalization within budget at λ={lambda}, s={s}, s'={sp}, d={d} (dev {:.2e})",
                    r.max_deviation
                ),
                r.all_within_budget,
            ));
        }
    }

    let ok = report("5 (diagonalization & orthogonality)", &clauses);
    assert!(ok);
}

#[test]
fn criterion_6_z_moments() {
    let arena = TreeArena::new();
    let mut clauses = Vec::new();
    for (pt, (lambda, s, sp)) in [(0u64, (2.0, 0.6, 0.5)), (1, (1.5, 0.7, 0.6))] {
        let tp = TreeParams::new(lambda, s, sp).unwrap();
        let cache = LRCache::new(tp);
        let ss = s * sp;

        let log_theta =
            calibrate_threshold(&tp, 1, 0.05, 50_000, 3000 + pt, &cache, &arena).unwrap();
        let inner = TestSpec::lr_threshold(1, tp, log_theta);
        let reference = build_z_reference(&inner, 2_000, 3100 + pt, &cache, &arena).unwrap();

        // The reference sample biases the centering terms by O(p_ind_se) in
        // three places (B, C, D), each scaled by λ²ss'.
        let ref_bias = 3.0 * lambda * lambda * ss * reference.p_ind_se;

        let n = 50_000u64;
        let z_ind = estimate_z_mean(
            &inner,
            &reference,
            n,
            |i| {
                let mut rng = derive_rng(3200 + pt, 0, i);
                Ok(sample_ind_pair(&tp, 2, &mut rng, &arena)?)
            },
            &cache,
            &arena,
        )
        .unwrap();
        clauses.push((
            format!(
                "E[Z] = 0 under the independent law at λ={lambda}, s={s}, s'={sp} ({:.4} ± {:.4})",
                z_ind.estimate, z_ind.se
            ),
            z_ind.estimate.abs() <= 4.0 * (z_ind.se + ref_bias),
        ));

        let z_corr = estimate_z_mean(
            &inner,
            &reference,
            n,
            |i| {
                let mut rng = derive_rng(3300 + pt, 0, i);
                Ok(treecorr::sampling::sample_corr_gw(&tp, 2, &mut rng, &arena)?)
            },
            &cache,
            &arena,
        )
        .unwrap();
        let p_corr = estimate_corr_acceptance(&inner, n, 3400 + pt, &cache, &arena).unwrap();
        let target = lambda * ss * p_corr.estimate;
        let tol = 4.0 * (z_corr.se + lambda * ss * p_corr.se + ref_bias);
        clauses.push((
            format!(
                "E[Z] = λss'·P(accept) under the correlated law at λ={lambda}, s={s}, s'={sp} ({:.4} vs {target:.4})",
                z_corr.estimate
            ),
            (z_corr.estimate - target).abs() <= tol,
        ));
    }
    let ok = report("6 (Z-statistic moments)", &clauses);
    assert!(ok);
}

#[test]
fn criterion_7_kl_monotonicity_and_contrast() {
    let arena = TreeArena::new();
    let mut clauses = Vec::new();

    // Monotone in depth (within 2 SE) at a moderate point.
    let tp = TreeParams::new(2.0, 0.5, 0.5).unwrap();
    let cache = LRCache::new(tp);
    let kls: Vec<_> = (1..=3u32)
        .map(|d| estimate_kl(&tp, d, 20_000, 4000 + u64::from(d), &cache, &arena).unwrap())
        .collect();
    let mut monotone = kls[0].estimate >= -2.0 * kls[0].se;
    for w in kls.windows(2) {
        monotone &= w[1].estimate >= w[0].estimate - 2.0 * (w[0].se + w[1].se);
    }
    clauses.push((
        format!(
            "KL non-decreasing in depth at λ=2, ss'=0.25 ({})",
            kls.iter().map(|k| format!("{:.4}", k.estimate)).collect::<Vec<_>>().join(" ≤ ")
        ),
        monotone,
    ));

    // Phase contrast at λ = 6, depth 3.
    let tp_hi = TreeParams::new(6.0, 0.9, 0.9).unwrap();
    let tp_lo = TreeParams::new(6.0, 0.4, 0.4).unwrap();
    let cache_hi = LRCache::new(tp_hi);
    let cache_lo = LRCache::new(tp_lo);
    let kl_hi = estimate_kl(&tp_hi, 3, 2_000, 4100, &cache_hi, &arena).unwrap();
    let kl_lo = estimate_kl(&tp_lo, 3, 2_000, 4200, &cache_lo, &arena).unwrap();
    clauses.push((
        format!(
            "KL(ss'=0.81) ≥ 3·KL(ss'=0.16) at λ=6, d=3 ({:.3} vs 3×{:.3})",
            kl_hi.estimate, kl_lo.estimate
        ),
        kl_hi.estimate >= 3.0 * kl_lo.estimate - 2.0 * (kl_hi.se + 3.0 * kl_lo.se),
    ));

    // Jensen bound where the second-moment series converges.
    for (name, tp, cache, ss) in [
        ("λ=2, ss'=0.25", &tp, &cache, 0.25),
        ("λ=6, ss'=0.16", &tp_lo, &cache_lo, 0.16),
    ] {
        let mut jensen = true;
        for d in 1..=3u32 {
            let (sm, tail) = second_moment_exact(d, ss, 400).unwrap();
            let kl = estimate_kl(tp, d, 10_000, 4300 + u64::from(d), cache, &arena).unwrap();
            jensen &= kl.estimate <= (sm + tail).ln() + 4.0 * kl.se;
        }
        clauses.push((format!("KL ≤ log E[L²] (Jensen) at {name}, d ≤ 3"), jensen));
    }

    let ok = report("7 (KL monotonicity & phase contrast)", &clauses);
    assert!(ok);
}

#[test]
fn criterion_8_alignment_end_to_end() {
    let arena = TreeArena::new();
    let mut clauses = Vec::new();

    // Positive runs: identical-graph CER at N=500, λ=5, depth 2.
    let tp = TreeParams::new(5.0, 1.0, 1.0).unwrap();
    let cache = LRCache::new(tp);
    let log_theta = calibrate_threshold(&tp, 1, 0.01, 5_000, 8000, &cache, &arena).unwrap();
    let test = TestSpec::lr_threshold(1, tp, log_theta);
    let params = ModelParams::new(500, 5.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    let mut overlaps = Vec::new();
    let mut errors = Vec::new();
    for seed in 0..10u64 {
        let mut rng = derive_rng(8100, 0, seed);
        let pair = sample_cer(&params, &mut rng);
        let res = mpalign(&pair.g, &pair.g_prime, 2, &test, &cache, &arena);
        overlaps.push(overlap(&res.matches, &pair.sigma_star, pair.n_star as u64));
        errors.push(error_fraction(&res.matches, &pair.sigma_star, 500));
    }
    let mean_overlap = overlaps.iter().sum::<f64>() / overlaps.len() as f64;
    let mean_error = errors.iter().sum::<f64>() / errors.len() as f64;
    clauses.push((
        format!("mean overlap > 0 over 10 seeds at N=500, λ=5 (got {mean_overlap:.4})"),
        mean_overlap > 0.0,
    ));
    clauses.push((
        format!("mean error < 0.1 over 10 seeds at N=500, λ=5 (got {mean_error:.4})"),
        mean_error < 0.1,
    ));

    // Negative control: independent graphs, N=1000, λ=4, depth 3,
    // type-I 1e-3 calibration.
    let tp_nc = TreeParams::new(4.0, 1.0, 1.0).unwrap();
    let cache_nc = LRCache::new(tp_nc);
    let log_theta_nc =
        calibrate_threshold(&tp_nc, 2, 1e-3, 20_000, 8200, &cache_nc, &arena).unwrap();
    let test_nc = TestSpec::lr_threshold(2, tp_nc, log_theta_nc);
    let mut counts = Vec::new();
    for seed in 0..20u64 {
        let mut rng_a = derive_rng(8300, 0, seed);
        let mut rng_b = derive_rng(8300, 1, seed);
        let g = sample_er(1000, 4.0 / 1000.0, &mut rng_a);
        let h = sample_er(1000, 4.0 / 1000.0, &mut rng_b);
        let res = mpalign(&g, &h, 3, &test_nc, &cache_nc, &arena);
        counts.push(res.candidates.len() as f64);
    }
    let mean_candidates = counts.iter().sum::<f64>() / counts.len() as f64;
    clauses.push((
        format!("negative control emits ≤ 10 candidates on average (got {mean_candidates:.2})"),
        mean_candidates <= 10.0,
    ));

    let ok = report("8 (alignment end-to-end)", &clauses);
    assert!(ok);
}

#[test]
fn criterion_9_determinism() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_treecorr");
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("sweep.json");
    std::fs::write(
        &cfg_path,
        r#"{
            "lambda": [1.5, 2.5],
            "s": 0.6,
            "s_prime": [0.5, 0.7],
            "depths": [1, 2],
            "n_samples": 2000,
            "seed": 7,
            "test": { "type": "calibrated", "target_type1": 0.05, "calibration_samples": 2000 }
        }"#,
    )
    .unwrap();
    let run_sweep = |threads: &str| {
        let out = Command::new(bin)
            .args(["test-sweep", "--config", cfg_path.to_str().unwrap(), "--threads", threads])
            .output()
            .unwrap();
        assert!(out.status.success(), "sweep failed: {}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let one = run_sweep("1");
    let eight_a = run_sweep("8");
    let eight_b = run_sweep("8");
    let sweep_ok = one == eight_a && eight_a == eight_b && !one.is_empty();

    let run_sample = || {
        let out = Command::new(bin)
            .args([
                "sample", "cer", "--n-nodes", "300", "--lambda", "3.0", "--q", "0.9", "--r",
                "0.8", "--seed", "42",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let sample_ok = run_sample() == run_sample();

    let ok = report(
        "9 (determinism)",
        &[
            ("sweep output bit-identical across runs and thread counts".into(), sweep_ok),
            ("sampler output bit-identical across runs".into(), sample_ok),
        ],
    );
    assert!(ok);
}
