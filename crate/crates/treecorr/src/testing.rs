//! One-sided tree-correlation tests: likelihood-ratio threshold tests,
//! threshold schedules and empirical calibration, Z-statistic amplification,
//! and Monte-Carlo estimators of KL divergence and operating points.
//!
//! All estimators are embarrassingly parallel over samples. Each sample draws
//! its generator from `(master seed, stream, index)`, results are collected
//! into index order, and reductions run sequentially — so output is
//! bit-identical across thread counts.

use crate::likelihood::{likelihood_ratio, LRCache, LikelihoodError};
use crate::sampling::{sample_corr_gw, sample_gw, sample_ind_pair, SamplingError, TreeParams};
use crate::seeding::derive_rng;
use crate::treespace::{CanonTreeId, TreeArena};
use dashmap::DashMap;
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

/// Seed streams, one per independent sampling purpose.
mod stream {
    pub const CALIBRATE: u64 = 1;
    pub const KL: u64 = 2;
    pub const OP_IND: u64 = 3;
    pub const OP_CORR: u64 = 4;
    pub const Z_REF_LEFT: u64 = 5;
    pub const Z_REF_RIGHT: u64 = 6;
}

#[derive(Debug, Error)]
pub enum TestingError {
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("invalid test configuration: {0}")]
    InvalidConfig(String),
}

/// Point estimate with its Monte-Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateWithError {
    pub estimate: f64,
    pub se: f64,
    pub n_samples: u64,
}

impl EstimateWithError {
    fn from_samples(xs: &[f64]) -> Self {
        assert!(xs.len() >= 2, "need at least two samples for a standard error");
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        EstimateWithError { estimate: mean, se: (var / n).sqrt(), n_samples: xs.len() as u64 }
    }
}

/// Fixed reference sample backing the analytic centering terms of the
/// Z-statistic. Holds `m` branching-law draws per side, the plug-in estimate
/// of the inner test's acceptance probability under the independent law, and
/// memoized one-sided acceptance rates.
pub struct ZReference {
    pub ref_left: Vec<CanonTreeId>,
    pub ref_right: Vec<CanonTreeId>,
    /// `(1/m²) Σ_{i,j} 𝒯(a_i, b_j)` — estimates `P^ind_d(𝒯 = 1)`.
    pub p_ind_hat: f64,
    /// Standard error of `p_ind_hat` (projection estimate for the two-sample
    /// U-statistic structure).
    pub p_ind_se: f64,
    /// Memo: `u(τ) = (1/m) Σ_j 𝒯(τ, b_j)`.
    accept_left: DashMap<CanonTreeId, f64>,
    /// Memo: `v(τ') = (1/m) Σ_i 𝒯(a_i, τ')`.
    accept_right: DashMap<CanonTreeId, f64>,
}

/// A one-sided test at a given depth.
pub struct TestSpec {
    pub depth: u32,
    pub tp: TreeParams,
    pub kind: TestKind,
}

pub enum TestKind {
    /// Accept when `log L_depth(t, t') > log_theta`.
    LrThreshold { log_theta: f64 },
    /// Accept when the centered cross-count statistic built from the inner
    /// depth-(depth−1) test exceeds `xi`.
    ZAmplified { xi: f64, inner: Box<TestSpec>, reference: Arc<ZReference> },
}

impl TestSpec {
    pub fn lr_threshold(depth: u32, tp: TreeParams, log_theta: f64) -> Self {
        TestSpec { depth, tp, kind: TestKind::LrThreshold { log_theta } }
    }

    pub fn z_amplified(
        inner: TestSpec,
        xi: f64,
        reference: Arc<ZReference>,
    ) -> Result<Self, TestingError> {
        if xi <= 0.0 {
            return Err(TestingError::InvalidConfig("amplified threshold must be positive".into()));
        }
        Ok(TestSpec {
            depth: inner.depth + 1,
            tp: inner.tp,
            kind: TestKind::ZAmplified { xi, inner: Box::new(inner), reference },
        })
    }
}

/// Runs the test on a tree pair of depth ≤ `spec.depth`.
pub fn evaluate(
    t: CanonTreeId,
    t_prime: CanonTreeId,
    spec: &TestSpec,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<bool, TestingError> {
    match &spec.kind {
        TestKind::LrThreshold { log_theta } => {
            let lr = likelihood_ratio(t, t_prime, spec.depth, cache, arena)?;
            Ok(lr.ln() > *log_theta)
        }
        TestKind::ZAmplified { xi, inner, reference } => {
            let z = z_statistic(t, t_prime, inner, reference, cache, arena)?;
            Ok(z > *xi)
        }
    }
}

/// Likelihood-ratio threshold test: `1{L_d(t,t') > θ}`.
pub fn lr_test(
    t: CanonTreeId,
    t_prime: CanonTreeId,
    spec: &TestSpec,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<bool, TestingError> {
    assert!(
        matches!(spec.kind, TestKind::LrThreshold { .. }),
        "lr_test requires a threshold-test spec"
    );
    evaluate(t, t_prime, spec, cache, arena)
}

/// Geometric threshold schedule `log θ_d = γ (λss')^d`. Returns the log
/// threshold; when `λss' ≤ 1` the schedule does not grow and the function
/// emits a warning on stderr.
pub fn threshold_schedule(gamma: f64, tp: &TreeParams, d: u32) -> f64 {
    assert!(gamma >= 0.0, "schedule rate must be nonnegative");
    let growth = tp.lambda * tp.s * tp.s_prime;
    if growth <= 1.0 {
        eprintln!(
            "warning: threshold schedule with λss' = {growth} ≤ 1 does not grow with depth"
        );
    }
    gamma * growth.powi(d as i32)
}

/// Empirical threshold: the conservative `(1 − target_type1)` quantile of
/// `log L_d` over `n_samples` independent-law draws. Uses the higher of the
/// two nearest order statistics so the resulting test errs on the small
/// type-I side.
pub fn calibrate_threshold(
    tp: &TreeParams,
    d: u32,
    target_type1: f64,
    n_samples: u64,
    master_seed: u64,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<f64, TestingError> {
    assert!((0.0..=1.0).contains(&target_type1));
    if (n_samples as f64) * target_type1 < 20.0 {
        return Err(TestingError::InvalidConfig(format!(
            "calibration needs n_samples·target ≥ 20, got {n_samples}·{target_type1}"
        )));
    }
    let mut logs = par_map_samples(n_samples, |i| {
        let mut rng = derive_rng(master_seed, stream::CALIBRATE, i);
        let (t, t_prime) = sample_ind_pair(tp, d, &mut rng, arena)?;
        Ok(likelihood_ratio(t, t_prime, d, cache, arena)?.ln())
    })?;
    logs.sort_by(f64::total_cmp);
    let pos = (1.0 - target_type1) * (n_samples as f64 - 1.0);
    Ok(logs[pos.ceil() as usize])
}

/// Builds the reference sample for Z-statistic centering: `m` draws of
/// `GW_d(λs)` and `GW_d(λs')` plus the plug-in acceptance probability of the
/// inner test under the independent law.
pub fn build_z_reference(
    inner: &TestSpec,
    m: u64,
    master_seed: u64,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<ZReference, TestingError> {
    assert!(m >= 2, "reference sample needs at least two draws per side");
    let tp = &inner.tp;
    let ref_left = par_map_samples(m, |i| {
        let mut rng = derive_rng(master_seed, stream::Z_REF_LEFT, i);
        Ok(sample_gw(tp.lambda * tp.s, inner.depth, &mut rng, arena)?)
    })?;
    let ref_right = par_map_samples(m, |i| {
        let mut rng = derive_rng(master_seed, stream::Z_REF_RIGHT, i);
        Ok(sample_gw(tp.lambda * tp.s_prime, inner.depth, &mut rng, arena)?)
    })?;

    // Full product average over the m×m grid, with a projection SE: the
    // variance of the row means plus the variance of the column means.
    let row_means: Vec<f64> = ref_left
        .par_iter()
        .map(|&a| -> Result<f64, TestingError> {
            let mut acc = 0.0;
            for &b in &ref_right {
                acc += f64::from(evaluate(a, b, inner, cache, arena)? as u8);
            }
            Ok(acc / m as f64)
        })
        .collect::<Result<_, _>>()?;
    let col_means: Vec<f64> = ref_right
        .par_iter()
        .map(|&b| -> Result<f64, TestingError> {
            let mut acc = 0.0;
            for &a in &ref_left {
                acc += f64::from(evaluate(a, b, inner, cache, arena)? as u8);
            }
            Ok(acc / m as f64)
        })
        .collect::<Result<_, _>>()?;
    let p_hat = row_means.iter().sum::<f64>() / m as f64;
    let var_of = |xs: &[f64]| {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() as f64 - 1.0)
    };
    let p_se = ((var_of(&row_means) + var_of(&col_means)) / m as f64).sqrt();
    Ok(ZReference {
        ref_left,
        ref_right,
        p_ind_hat: p_hat,
        p_ind_se: p_se,
        accept_left: DashMap::new(),
        accept_right: DashMap::new(),
    })
}

impl ZReference {
    fn accept_rate_left(
        &self,
        tau: CanonTreeId,
        inner: &TestSpec,
        cache: &LRCache,
        arena: &TreeArena,
    ) -> Result<f64, TestingError> {
        if let Some(u) = self.accept_left.get(&tau) {
            return Ok(*u);
        }
        let mut acc = 0.0;
        for &b in &self.ref_right {
            acc += f64::from(evaluate(tau, b, inner, cache, arena)? as u8);
        }
        let u = acc / self.ref_right.len() as f64;
        self.accept_left.insert(tau, u);
        Ok(u)
    }

    fn accept_rate_right(
        &self,
        tau_prime: CanonTreeId,
        inner: &TestSpec,
        cache: &LRCache,
        arena: &TreeArena,
    ) -> Result<f64, TestingError> {
        if let Some(v) = self.accept_right.get(&tau_prime) {
            return Ok(*v);
        }
        let mut acc = 0.0;
        for &a in &self.ref_left {
            acc += f64::from(evaluate(a, tau_prime, inner, cache, arena)? as u8);
        }
        let v = acc / self.ref_left.len() as f64;
        self.accept_right.insert(tau_prime, v);
        Ok(v)
    }
}

/// Centered cross-count statistic for a depth-(d+1) pair given a depth-d
/// inner test 𝒯:
///
/// ```text
/// Z = Σ_{(τ,τ'): 𝒯(τ,τ')=1} (N_τ − λs·GW_d(τ)) (N'_{τ'} − λs'·GW_d(τ'))
/// ```
///
/// where `N_τ`, `N'_{τ'}` count root subtrees of `t`, `t'`. The infinite
/// centering sums over unrealized shapes are replaced by reference-sample
/// estimates: expanding the product, `Z = A − B − C + D` with
///
/// * `A`: double sum of `N_τ N'_{τ'} 𝒯` over realized shapes,
/// * `B = λs' Σ_τ N_τ u(τ)`, `u(τ) = P̂_{τ'~GW(λs')}(𝒯(τ,·)=1)`,
/// * `C = λs Σ_{τ'} N'_{τ'} v(τ')`, symmetric,
/// * `D = λ²ss'·P̂^ind(𝒯=1)`,
///
/// all hats taken over the fixed reference sample, whose standard error is
/// surfaced in [`ZReference::p_ind_se`] rather than hidden.
pub fn z_statistic(
    t: CanonTreeId,
    t_prime: CanonTreeId,
    inner: &TestSpec,
    reference: &ZReference,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<f64, TestingError> {
    let tp = &inner.tp;
    let kids = arena.child_multiset(t);
    let kids_prime = arena.child_multiset(t_prime);

    let mut a = 0.0;
    for &(tau, n) in &kids {
        for &(tau_prime, n_prime) in &kids_prime {
            if evaluate(tau, tau_prime, inner, cache, arena)? {
                a += f64::from(n) * f64::from(n_prime);
            }
        }
    }
    let mut b = 0.0;
    for &(tau, n) in &kids {
        b += f64::from(n) * reference.accept_rate_left(tau, inner, cache, arena)?;
    }
    b *= tp.lambda * tp.s_prime;
    let mut c = 0.0;
    for &(tau_prime, n_prime) in &kids_prime {
        c += f64::from(n_prime) * reference.accept_rate_right(tau_prime, inner, cache, arena)?;
    }
    c *= tp.lambda * tp.s;
    let d = tp.lambda * tp.lambda * tp.s * tp.s_prime * reference.p_ind_hat;
    Ok(a - b - c + d)
}

/// Amplified threshold `ξ = max{4λ√(ss')·p^{1/4}, 3λ^{3/4}(ss')^{1/4}}` for an
/// inner acceptance probability `p` under the independent law.
pub fn amplified_threshold(tp: &TreeParams, p_ind: f64) -> f64 {
    let ss = tp.s * tp.s_prime;
    let first = 4.0 * tp.lambda * ss.sqrt() * p_ind.powf(0.25);
    let second = 3.0 * tp.lambda.powf(0.75) * ss.powf(0.25);
    first.max(second)
}

/// Lifts a calibrated depth-d test to depth d+1 via the Z-statistic: builds a
/// reference sample of `ref_size` draws per side, estimates the inner
/// acceptance probability, and installs the amplified threshold.
pub fn amplify_test(
    inner: TestSpec,
    ref_size: u64,
    master_seed: u64,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<TestSpec, TestingError> {
    let reference = build_z_reference(&inner, ref_size, master_seed, cache, arena)?;
    let xi = amplified_threshold(&inner.tp, reference.p_ind_hat);
    TestSpec::z_amplified(inner, xi, Arc::new(reference))
}

/// Monte-Carlo estimate of `KL_d = E^corr[log L_d]`.
pub fn estimate_kl(
    tp: &TreeParams,
    d: u32,
    n_samples: u64,
    master_seed: u64,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<EstimateWithError, TestingError> {
    assert!(n_samples >= 100, "KL estimation needs at least 100 samples");
    let logs = par_map_samples(n_samples, |i| {
        let mut rng = derive_rng(master_seed, stream::KL, i);
        let (t, t_prime) = sample_corr_gw(tp, d, &mut rng, arena)?;
        Ok(likelihood_ratio(t, t_prime, d, cache, arena)?.ln())
    })?;
    Ok(EstimateWithError::from_samples(&logs))
}

/// Monte-Carlo type-I error (independent draws) and power (correlated draws)
/// of a test, `n_samples` each.
pub fn estimate_operating_point(
    spec: &TestSpec,
    n_samples: u64,
    master_seed: u64,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<(EstimateWithError, EstimateWithError), TestingError> {
    assert!(n_samples >= 2);
    let tp = &spec.tp;
    let type1 = par_map_samples(n_samples, |i| {
        let mut rng = derive_rng(master_seed, stream::OP_IND, i);
        let (t, t_prime) = sample_ind_pair(tp, spec.depth, &mut rng, arena)?;
        Ok(f64::from(evaluate(t, t_prime, spec, cache, arena)? as u8))
    })?;
    let power = par_map_samples(n_samples, |i| {
        let mut rng = derive_rng(master_seed, stream::OP_CORR, i);
        let (t, t_prime) = sample_corr_gw(tp, spec.depth, &mut rng, arena)?;
        Ok(f64::from(evaluate(t, t_prime, spec, cache, arena)? as u8))
    })?;
    Ok((EstimateWithError::from_samples(&type1), EstimateWithError::from_samples(&power)))
}

/// Monte-Carlo mean and SE of the Z-statistic under a sampler of depth-(d+1)
/// pairs. Used by the moment-identity checks and exposed for experiments.
pub fn estimate_z_mean<F>(
    inner: &TestSpec,
    reference: &ZReference,
    n_samples: u64,
    sample_pair: F,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<EstimateWithError, TestingError>
where
    F: Fn(u64) -> Result<(CanonTreeId, CanonTreeId), TestingError> + Sync,
{
    let zs = par_map_samples(n_samples, |i| {
        let (t, t_prime) = sample_pair(i)?;
        z_statistic(t, t_prime, inner, reference, cache, arena)
    })?;
    Ok(EstimateWithError::from_samples(&zs))
}

/// Deterministic parallel map over sample indices: results land in index
/// order regardless of thread scheduling.
fn par_map_samples<T, F>(n: u64, f: F) -> Result<Vec<T>, TestingError>
where
    T: Send,
    F: Fn(u64) -> Result<T, TestingError> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Monte-Carlo estimate of `P^corr_d(𝒯 = 1)` — the target of the correlated
/// Z-moment identity.
pub fn estimate_corr_acceptance(
    inner: &TestSpec,
    n_samples: u64,
    master_seed: u64,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<EstimateWithError, TestingError> {
    let hits = par_map_samples(n_samples, |i| {
        let mut rng = derive_rng(master_seed, stream::OP_CORR, i);
        let (t, t_prime) = sample_corr_gw(&inner.tp, inner.depth, &mut rng, arena)?;
        Ok(f64::from(evaluate(t, t_prime, inner, cache, arena)? as u8))
    })?;
    Ok(EstimateWithError::from_samples(&hits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup(lambda: f64, s: f64, sp: f64) -> (TreeParams, LRCache, TreeArena) {
        let tp = TreeParams::new(lambda, s, sp).unwrap();
        (tp, LRCache::new(tp), TreeArena::new())
    }

    #[test]
    fn lr_test_examples() {
        let (tp, cache, arena) = setup(1.0, 1.0, 1.0);
        // Zero threshold: accepts whenever L_d > 0.
        let spec = TestSpec::lr_threshold(1, tp, f64::NEG_INFINITY);
        assert!(lr_test(arena.leaf(), arena.leaf(), &spec, &cache, &arena).unwrap());
        // L_1(•,•) = e^{λss'} = e > 2.
        let spec = TestSpec::lr_threshold(1, tp, 2.0f64.ln());
        assert!(lr_test(arena.leaf(), arena.leaf(), &spec, &cache, &arena).unwrap());
        // ss' = 0: on the support of the independent law (left trees are
        // bare leaves when λs = 0), L_d ≡ 1 — never strictly above θ = 1.
        let (tp0, cache0, _) = setup(1.0, 0.0, 1.0);
        let spec = TestSpec::lr_threshold(2, tp0, 0.0);
        assert!(!lr_test(arena.leaf(), arena.star(3), &spec, &cache0, &arena).unwrap());
    }

    #[test]
    fn lr_test_monotone_in_threshold() {
        let (tp, cache, arena) = setup(2.0, 0.8, 0.7);
        for i in 0..200u64 {
            let mut rng = derive_rng(5, 0, i);
            let (t, t_prime) = sample_ind_pair(&tp, 2, &mut rng, &arena).unwrap();
            let mut prev = true;
            for log_theta in [-2.0, -0.5, 0.0, 0.5, 2.0] {
                let spec = TestSpec::lr_threshold(2, tp, log_theta);
                let hit = lr_test(t, t_prime, &spec, &cache, &arena).unwrap();
                assert!(prev || !hit, "raising θ flipped 0 → 1");
                prev = hit;
            }
        }
    }

    #[test]
    fn threshold_schedule_values() {
        let (tp, _, _) = setup(4.0, 1.0, 0.5); // λss' = 2
        assert_eq!(threshold_schedule(0.0, &tp, 5), 0.0);
        assert_relative_eq!(threshold_schedule(0.1, &tp, 3), 0.8, epsilon = 1e-12);
        assert_relative_eq!(threshold_schedule(0.7, &tp, 0), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn calibration_degenerate_cases() {
        let (tp, cache, arena) = setup(1.0, 0.0, 0.5);
        // L_d ≡ 1 when ss' = 0: every quantile is log 1 = 0.
        let theta = calibrate_threshold(&tp, 2, 0.5, 100, 3, &cache, &arena).unwrap();
        assert_eq!(theta, 0.0);
        // target = 1: the minimum observed value.
        let (tp2, cache2, _) = setup(1.5, 0.9, 0.8);
        let theta_min = calibrate_threshold(&tp2, 1, 1.0, 50, 3, &cache2, &arena).unwrap();
        let theta_mid = calibrate_threshold(&tp2, 1, 0.5, 50, 3, &cache2, &arena).unwrap();
        assert!(theta_min <= theta_mid);
        // Insufficient sample mass for the target quantile.
        assert!(calibrate_threshold(&tp2, 1, 0.001, 100, 3, &cache2, &arena).is_err());
    }

    #[test]
    fn calibrated_test_holds_type1_on_fresh_sample() {
        let (tp, cache, arena) = setup(3.0, 0.8, 0.8);
        let target = 0.01;
        let theta = calibrate_threshold(&tp, 2, target, 20_000, 11, &cache, &arena).unwrap();
        let spec = TestSpec::lr_threshold(2, tp, theta);
        let (type1, power) = estimate_operating_point(&spec, 20_000, 12, &cache, &arena).unwrap();
        assert!(type1.estimate <= 0.015, "type-I {} too high", type1.estimate);
        assert!(power.estimate > type1.estimate);
    }

    #[test]
    fn z_statistic_trivial_inner() {
        // Inner test that never accepts (θ = ∞): A = B = C = 0 and p̂ = 0.
        let (tp, cache, arena) = setup(2.0, 0.7, 0.7);
        let inner = TestSpec::lr_threshold(1, tp, f64::INFINITY);
        let reference = build_z_reference(&inner, 50, 5, &cache, &arena).unwrap();
        assert_eq!(reference.p_ind_hat, 0.0);
        let mut rng = derive_rng(6, 0, 0);
        let (t, t_prime) = sample_ind_pair(&tp, 2, &mut rng, &arena).unwrap();
        let z = z_statistic(t, t_prime, &inner, &reference, &cache, &arena).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn z_mean_zero_under_independent_law() {
        let (tp, cache, arena) = setup(3.0, 0.8, 0.8);
        let theta = calibrate_threshold(&tp, 1, 0.05, 5_000, 21, &cache, &arena).unwrap();
        let inner = TestSpec::lr_threshold(1, tp, theta);
        let reference = build_z_reference(&inner, 2_000, 22, &cache, &arena).unwrap();
        let est = estimate_z_mean(
            &inner,
            &reference,
            20_000,
            |i| {
                let mut rng = derive_rng(23, 100, i);
                Ok(sample_ind_pair(&tp, 2, &mut rng, &arena)?)
            },
            &cache,
            &arena,
        )
        .unwrap();
        // Allow for both the MC error and the reference-sample error in D.
        let slack = 4.0 * (est.se + tp.lambda * tp.lambda * tp.s * tp.s_prime * reference.p_ind_se);
        assert!(est.estimate.abs() <= slack, "|E Z| = {} > {slack}", est.estimate.abs());
    }

    #[test]
    fn z_mean_under_correlated_law() {
        let (tp, cache, arena) = setup(3.0, 0.8, 0.8);
        let theta = calibrate_threshold(&tp, 1, 0.05, 5_000, 31, &cache, &arena).unwrap();
        let inner = TestSpec::lr_threshold(1, tp, theta);
        let reference = build_z_reference(&inner, 2_000, 32, &cache, &arena).unwrap();
        let est = estimate_z_mean(
            &inner,
            &reference,
            20_000,
            |i| {
                let mut rng = derive_rng(33, 100, i);
                Ok(sample_corr_gw(&tp, 2, &mut rng, &arena)?)
            },
            &cache,
            &arena,
        )
        .unwrap();
        let p_corr = estimate_corr_acceptance(&inner, 20_000, 34, &cache, &arena).unwrap();
        let target = tp.lambda * tp.s * tp.s_prime * p_corr.estimate;
        let slack = 4.0
            * (est.se
                + tp.lambda * tp.s * tp.s_prime * p_corr.se
                + tp.lambda * tp.lambda * tp.s * tp.s_prime * reference.p_ind_se);
        assert!(
            (est.estimate - target).abs() <= slack,
            "E Z = {} vs target {target} (slack {slack})",
            est.estimate
        );
    }

    #[test]
    fn amplified_threshold_formula() {
        let (tp, _, _) = setup(16.0, 1.0, 1.0);
        // p = 1: max{4·16·1, 3·8·1} = 64.
        assert_relative_eq!(amplified_threshold(&tp, 1.0), 64.0, epsilon = 1e-12);
        // p = 0: the first branch vanishes.
        assert_relative_eq!(amplified_threshold(&tp, 0.0), 3.0 * 8.0, epsilon = 1e-12);
    }

    #[test]
    fn amplified_test_reduces_type1() {
        let (tp, cache, arena) = setup(40.0, 0.7, 0.7);
        let theta = calibrate_threshold(&tp, 1, 0.05, 2_000, 41, &cache, &arena).unwrap();
        let inner = TestSpec::lr_threshold(1, tp, theta);
        let (inner_t1, _) = estimate_operating_point(&inner, 4_000, 42, &cache, &arena).unwrap();
        let amplified = amplify_test(inner, 500, 43, &cache, &arena).unwrap();
        let (amp_t1, _) = estimate_operating_point(&amplified, 4_000, 44, &cache, &arena).unwrap();
        assert!(
            amp_t1.estimate <= inner_t1.estimate / 2.0 + 4.0 * (amp_t1.se + inner_t1.se),
            "amplified type-I {} vs inner {}",
            amp_t1.estimate,
            inner_t1.estimate
        );
    }

    #[test]
    fn kl_trivial_cases() {
        let arena = TreeArena::new();
        // d = 0: one outcome, log L = 0 exactly.
        let (tp, cache, _) = setup(2.0, 0.6, 0.6);
        let kl0 = estimate_kl(&tp, 0, 200, 51, &cache, &arena).unwrap();
        assert_eq!(kl0.estimate, 0.0);
        assert_eq!(kl0.se, 0.0);
        // ss' = 0: L ≡ 1 at any depth.
        let (tp0, cache0, _) = setup(2.0, 0.0, 0.6);
        let kl = estimate_kl(&tp0, 2, 200, 52, &cache0, &arena).unwrap();
        assert_eq!(kl.estimate, 0.0);
    }

    #[test]
    fn kl_monotone_in_depth() {
        let (tp, cache, arena) = setup(2.0, 0.5, 0.5);
        let mut prev = EstimateWithError { estimate: 0.0, se: 0.0, n_samples: 0 };
        for d in 1..=3u32 {
            let kl = estimate_kl(&tp, d, 20_000, 53, &cache, &arena).unwrap();
            assert!(
                kl.estimate + 2.0 * (kl.se + prev.se) >= prev.estimate,
                "KL decreased at depth {d}: {} < {}",
                kl.estimate,
                prev.estimate
            );
            prev = kl;
        }
    }

    #[test]
    fn operating_point_trivial_specs() {
        let (tp, cache, arena) = setup(1.5, 0.7, 0.7);
        // Always-accept / always-reject thresholds.
        let always = TestSpec::lr_threshold(1, tp, f64::NEG_INFINITY);
        let (t1, pw) = estimate_operating_point(&always, 200, 61, &cache, &arena).unwrap();
        assert_eq!((t1.estimate, pw.estimate), (1.0, 1.0));
        let never = TestSpec::lr_threshold(1, tp, f64::INFINITY);
        let (t1, pw) = estimate_operating_point(&never, 200, 61, &cache, &arena).unwrap();
        assert_eq!((t1.estimate, pw.estimate), (0.0, 0.0));
    }

    #[test]
    fn estimates_deterministic_across_runs() {
        let (tp, cache, arena) = setup(2.0, 0.6, 0.8);
        let a = estimate_kl(&tp, 2, 2_000, 71, &cache, &arena).unwrap();
        let cache2 = LRCache::new(tp);
        let b = estimate_kl(&tp, 2, 2_000, 71, &cache2, &arena).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.se.to_bits(), b.se.to_bits());
    }
}
