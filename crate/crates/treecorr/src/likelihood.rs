//! The recursive likelihood ratio between correlated and independent tree
//! laws, with exact tree likelihoods and an explicit product lower bound.
//!
//! For depth `d` and parameters `(λ, s, s')`, `L_d(t, t')` is the ratio of the
//! correlated-pair probability of observing `(t, t')` (both read up to depth
//! `d`) to the independent-product probability. It satisfies `L_0 ≡ 1` and
//!
//! ```text
//! L_{d+1}(t, t') = Σ_{k=0}^{c∧c'} ψ(k, c, c') · Σ_{σ, σ'} Π_i L_d(t_{σ(i)}, t'_{σ'(i)})
//! ```
//!
//! where `c`, `c'` are the root degrees, the inner sum runs over injections
//! `σ: [k] → [c]`, `σ': [k] → [c']`, and
//! `ψ(k, c, c') = e^{λss'} λ^{-k}/k! (1-s')^{c-k} (1-s)^{c'-k}`.
//! The injection double sum factorizes as `k! · m_k`, where `m_k` sums all
//! size-`k` bipartite matchings of the child-pair value matrix — computed by a
//! bitmask DP over the smaller side.

use crate::logvalue::{ln_factorial, poisson_ln_pmf, LogValue};
use crate::sampling::TreeParams;
use crate::treespace::{CanonTreeId, TreeArena};
use dashmap::DashMap;
use thiserror::Error;

/// Hard cap on `min(c, c')` for the bitmask matching DP.
pub const MATCHING_DEGREE_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum LikelihoodError {
    #[error(
        "matching table of min-degree {min_degree} exceeds the cap of {cap}; \
         lower lambda or cap the degree of sampled trees"
    )]
    DegreeCapExceeded { min_degree: usize, cap: usize },
}

/// `ψ(k, c, c') = e^{λss'} · λ^{-k}/k! · (1-s')^{c-k} · (1-s)^{c'-k}`.
///
/// Exact zero when `s' = 1, c > k` (resp. `s = 1, c' > k`).
/// Panics if `k > min(c, c')` (contract violation).
pub fn psi(k: u32, c: u32, c_prime: u32, tp: &TreeParams) -> LogValue {
    assert!(k <= c.min(c_prime), "psi requires k ≤ min(c, c'); got k={k}, c={c}, c'={c_prime}");
    let mut ln = tp.lambda * tp.s * tp.s_prime - f64::from(k) * tp.lambda.ln() - ln_factorial(u64::from(k));
    if k == 0 {
        // λ^0 = 1 even when λ = 0 (where λ.ln() is -inf): drop the k-term.
        ln = tp.lambda * tp.s * tp.s_prime;
    }
    // Skip zero exponents so that 0 · ln(0) never produces NaN.
    if c > k {
        ln += f64::from(c - k) * (1.0 - tp.s_prime).ln();
    }
    if c_prime > k {
        ln += f64::from(c_prime - k) * (1.0 - tp.s).ln();
    }
    LogValue::from_ln(ln)
}

/// Log-probability that a `Poi(mu)`-offspring branching tree, read up to
/// depth `d`, equals the unlabeled tree `t` (nodes of `t` below depth `d`
/// are ignored).
///
/// Uses the child-count factorization: with `N_τ` the multiplicity of child
/// shape `τ`, the counts are independent `Poi(mu · GW_{d-1}(τ))`, giving
/// `GW_d(t) = e^{-mu} Π_τ (mu · GW_{d-1}(τ))^{N_τ} / N_τ!` — the multiset
/// symmetry factors this induces are what make the likelihood a genuine
/// distribution over unlabeled trees.
pub fn gw_log_likelihood(t: CanonTreeId, d: u32, mu: f64, arena: &TreeArena) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let mut ln = -mu;
    for (tau, count) in arena.child_multiset(t) {
        let child_ln = gw_log_likelihood(tau, d - 1, mu, arena);
        if mu == 0.0 {
            return f64::NEG_INFINITY; // children present but zero offspring rate
        }
        ln += f64::from(count) * (mu.ln() + child_ln) - ln_factorial(u64::from(count));
    }
    ln
}

/// Bipartite matching sums of a `c × c'` value matrix: `m_0 = 1` and `m_k`
/// sums, over every set of `k` pairwise-disjoint (row, column) pairs, the
/// product of the selected entries.
///
/// Bitmask DP over the smaller dimension; `min(c, c')` must not exceed
/// [`MATCHING_DEGREE_CAP`].
pub fn matching_sums(m: &[Vec<LogValue>]) -> Result<Vec<LogValue>, LikelihoodError> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let (outer, inner) = (rows.max(cols), rows.min(cols));
    if inner > MATCHING_DEGREE_CAP {
        return Err(LikelihoodError::DegreeCapExceeded { min_degree: inner, cap: MATCHING_DEGREE_CAP });
    }
    let transposed = cols > rows;
    let at = |i: usize, j: usize| if transposed { m[j][i] } else { m[i][j] };
    let full = 1usize << inner;
    // dp[mask] = sum over ways to match some subset of the outer elements seen
    // so far onto exactly the inner elements in `mask`.
    let mut dp = vec![LogValue::ZERO; full];
    dp[0] = LogValue::ONE;
    for i in 0..outer {
        let prev = dp.clone(); // the "outer element i unmatched" branch
        for mask in 0..full {
            if prev[mask].is_zero() {
                continue;
            }
            for j in 0..inner {
                if mask & (1 << j) == 0 {
                    let v = at(i, j);
                    if !v.is_zero() {
                        dp[mask | (1 << j)] += prev[mask] * v;
                    }
                }
            }
        }
    }
    let mut out = vec![LogValue::ZERO; inner + 1];
    for (mask, &v) in dp.iter().enumerate() {
        out[mask.count_ones() as usize] += v;
    }
    Ok(out)
}

/// Memo table for the likelihood ratio, keyed on `(t, t', depth)`.
///
/// Valid only for the parameters it was built with. Concurrent reads and
/// inserts are safe; a duplicated computation stores the same value.
pub struct LRCache {
    tp: TreeParams,
    map: DashMap<(CanonTreeId, CanonTreeId, u32), LogValue>,
}

impl LRCache {
    pub fn new(tp: TreeParams) -> Self {
        LRCache { tp, map: DashMap::new() }
    }

    pub fn params(&self) -> &TreeParams {
        &self.tp
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// The recursive likelihood ratio `L_d(t, t')` in log domain.
///
/// `L_0 ≡ 1`; deeper values follow the ψ/matching recursion in the module
/// docs. Nodes below depth `d` are ignored. Results are memoized in `cache`
/// (which pins the parameters).
pub fn likelihood_ratio(
    t: CanonTreeId,
    t_prime: CanonTreeId,
    d: u32,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<LogValue, LikelihoodError> {
    if d == 0 {
        return Ok(LogValue::ONE);
    }
    if let Some(v) = cache.map.get(&(t, t_prime, d)) {
        return Ok(*v);
    }
    let kids = arena.children(t);
    let kids_prime = arena.children(t_prime);
    let (c, c_prime) = (kids.len(), kids_prime.len());
    if d == 1 {
        // At depth 1 every child-pair value is L_0 = 1, so the matching sum
        // collapses to m_k = C(c,k)·C(c',k)·k! in closed form. This avoids the
        // bitmask DP entirely, so depth-1 ratios have no degree cap.
        let (cu, cpu) = (c as u64, c_prime as u64);
        let ln_binom = |n: u64, k: u64| ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
        let mut total = LogValue::ZERO;
        for k in 0..=c.min(c_prime) as u64 {
            let ln_mk = ln_binom(cu, k) + ln_binom(cpu, k) + ln_factorial(k);
            total += psi(k as u32, c as u32, c_prime as u32, &cache.tp)
                * LogValue::from_ln(ln_factorial(k) + ln_mk);
        }
        cache.map.insert((t, t_prime, d), total);
        return Ok(total);
    }
    let mut matrix = vec![vec![LogValue::ZERO; c_prime]; c];
    for (i, &a) in kids.iter().enumerate() {
        for (j, &b) in kids_prime.iter().enumerate() {
            matrix[i][j] = likelihood_ratio(a, b, d - 1, cache, arena)?;
        }
    }
    let m = matching_sums(&matrix)?;
    let mut total = LogValue::ZERO;
    for (k, &mk) in m.iter().enumerate() {
        let k = k as u32;
        let k_fact = LogValue::from_ln(ln_factorial(u64::from(k)));
        total += psi(k, c as u32, c_prime as u32, &cache.tp) * k_fact * mk;
    }
    cache.map.insert((t, t_prime, d), total);
    Ok(total)
}

/// A rooted-subtree embedding: for each child of the embedded tree (in
/// canonical order), the index of the host child it maps into, plus the
/// embedding of that subtree.
#[derive(Clone, Debug, Default)]
pub struct Embedding {
    pub maps: Vec<(usize, Embedding)>,
}

impl Embedding {
    /// Checks shape compatibility and injectivity against `(inner, host)`.
    pub fn is_valid(&self, inner: CanonTreeId, host: CanonTreeId, arena: &TreeArena) -> bool {
        let inner_kids = arena.children(inner);
        let host_kids = arena.children(host);
        if self.maps.len() != inner_kids.len() {
            return false;
        }
        let mut used = std::collections::HashSet::new();
        for ((idx, sub), &ik) in self.maps.iter().zip(&inner_kids) {
            if *idx >= host_kids.len() || !used.insert(*idx) {
                return false;
            }
            if !sub.is_valid(ik, host_kids[*idx], arena) {
                return false;
            }
        }
        true
    }
}

/// Finds some rooted-subtree embedding of `inner` into `host`, if one exists.
/// Backtracking over injective child assignments; intended for small trees.
pub fn find_embedding(inner: CanonTreeId, host: CanonTreeId, arena: &TreeArena) -> Option<Embedding> {
    let inner_kids = arena.children(inner);
    let host_kids = arena.children(host);
    if inner_kids.len() > host_kids.len() {
        return None;
    }
    fn assign(
        pos: usize,
        inner_kids: &[CanonTreeId],
        host_kids: &[CanonTreeId],
        used: &mut Vec<bool>,
        acc: &mut Vec<(usize, Embedding)>,
        arena: &TreeArena,
    ) -> bool {
        if pos == inner_kids.len() {
            return true;
        }
        for j in 0..host_kids.len() {
            if used[j] {
                continue;
            }
            if let Some(sub) = find_embedding(inner_kids[pos], host_kids[j], arena) {
                used[j] = true;
                acc.push((j, sub));
                if assign(pos + 1, inner_kids, host_kids, used, acc, arena) {
                    return true;
                }
                acc.pop();
                used[j] = false;
            }
        }
        false
    }
    let mut used = vec![false; host_kids.len()];
    let mut acc = Vec::new();
    if assign(0, &inner_kids, &host_kids, &mut used, &mut acc, arena) {
        Some(Embedding { maps: acc })
    } else {
        None
    }
}

/// Explicit product lower bound on `L_{d+k}(t, t')` along a shared subtree.
///
/// Given a common subtree `t_star` embedded into `t` (via `emb`) and into
/// `t_prime` (via `emb_prime`), returns
///
/// ```text
/// Π_{i ∈ t_star, depth(i) ≤ d-1} ψ(c*(i), c_t(σ(i)), c_t'(σ'(i)))
///   · Π_{j ∈ t_star, depth(j) = d} L_k(t_[σ(j)], t'_[σ'(j)])
/// ```
///
/// which never exceeds `likelihood_ratio(t, t', d + k)`.
/// Panics on invalid embeddings (contract violation).
#[allow(clippy::too_many_arguments)]
pub fn lr_lower_bound(
    t: CanonTreeId,
    t_prime: CanonTreeId,
    t_star: CanonTreeId,
    emb: &Embedding,
    emb_prime: &Embedding,
    d: u32,
    k: u32,
    cache: &LRCache,
    arena: &TreeArena,
) -> Result<LogValue, LikelihoodError> {
    assert!(emb.is_valid(t_star, t, arena), "embedding of t_star into t is invalid");
    assert!(emb_prime.is_valid(t_star, t_prime, arena), "embedding of t_star into t' is invalid");
    fn go(
        star: CanonTreeId,
        node: CanonTreeId,
        node_prime: CanonTreeId,
        emb: &Embedding,
        emb_prime: &Embedding,
        remaining: u32,
        k: u32,
        cache: &LRCache,
        arena: &TreeArena,
    ) -> Result<LogValue, LikelihoodError> {
        if remaining == 0 {
            // Generation-d node: contributes a depth-k likelihood factor.
            return likelihood_ratio(node, node_prime, k, cache, arena);
        }
        let star_kids = arena.children(star);
        let host = arena.children(node);
        let host_prime = arena.children(node_prime);
        let mut acc = psi(
            star_kids.len() as u32,
            host.len() as u32,
            host_prime.len() as u32,
            cache.params(),
        );
        for (pos, &sk) in star_kids.iter().enumerate() {
            let (i, ref sub) = emb.maps[pos];
            let (j, ref sub_prime) = emb_prime.maps[pos];
            acc = acc
                * go(sk, host[i], host_prime[j], sub, sub_prime, remaining - 1, k, cache, arena)?;
        }
        Ok(acc)
    }
    go(t_star, t, t_prime, emb, emb_prime, d, k, cache, arena)
}

/// Exact Poisson log-pmf of a root degree — convenience re-export used by
/// tests and the spectral layer.
pub fn poisson_log_pmf(k: u64, mu: f64) -> f64 {
    poisson_ln_pmf(k, mu)
}
