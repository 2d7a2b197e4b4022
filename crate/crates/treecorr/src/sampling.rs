//! Seeded generators: Erdős–Rényi graphs, the asymmetric correlated graph
//! pair model, and correlated / independent Galton–Watson trees.
//!
//! Every sampler is a pure function of `(params, rng)`; parallel Monte Carlo
//! derives independent per-task generators via [`crate::seeding`].

use crate::treespace::{CanonTreeId, TreeArena};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

/// Default hard cap on sampled tree sizes; supercritical branching trees are
/// infinite with positive probability, so sampling must be able to bail out.
pub const DEFAULT_NODE_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("tree sample exceeded the node cap of {cap} nodes")]
    Truncated { cap: u64 },
}

/// Tree-level parameters: offspring density `lambda` and the two effective
/// correlation strengths `s`, `s_prime` (each in `[0, 1]`).
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct TreeParams {
    pub lambda: f64,
    pub s: f64,
    pub s_prime: f64,
}

impl TreeParams {
    pub fn new(lambda: f64, s: f64, s_prime: f64) -> Result<Self, SamplingError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(SamplingError::InvalidParameter(format!("lambda = {lambda} must be ≥ 0")));
        }
        for (name, v) in [("s", s), ("s_prime", s_prime)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SamplingError::InvalidParameter(format!("{name} = {v} must be in [0, 1]")));
            }
        }
        Ok(TreeParams { lambda, s, s_prime })
    }

    /// The parameters with the two sides swapped.
    pub fn swapped(self) -> Self {
        TreeParams { lambda: self.lambda, s: self.s_prime, s_prime: self.s }
    }

    /// Mean offspring of the intersection tree, `lambda·s·s'`.
    pub fn mu_star(self) -> f64 {
        self.lambda * self.s * self.s_prime
    }
}

/// Graph-level model parameters.
///
/// `n_nodes` is the node budget N; `q`, `q_prime` are node-retention and
/// `r`, `r_prime` edge-retention probabilities. The effective correlation
/// strengths are `s = q·r` and `s' = q'·r'`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelParams {
    pub n_nodes: usize,
    pub lambda: f64,
    pub q: f64,
    pub q_prime: f64,
    pub r: f64,
    pub r_prime: f64,
}

impl ModelParams {
    pub fn new(
        n_nodes: usize,
        lambda: f64,
        q: f64,
        q_prime: f64,
        r: f64,
        r_prime: f64,
    ) -> Result<Self, SamplingError> {
        if n_nodes == 0 {
            return Err(SamplingError::InvalidParameter("n_nodes must be positive".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(SamplingError::InvalidParameter(format!("lambda = {lambda} must be ≥ 0")));
        }
        for (name, v) in [("q", q), ("q_prime", q_prime)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SamplingError::InvalidParameter(format!("{name} = {v} must be in [0, 1]")));
            }
        }
        for (name, v) in [("r", r), ("r_prime", r_prime)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(SamplingError::InvalidParameter(format!("{name} = {v} must be in (0, 1]")));
            }
        }
        let p = ModelParams { n_nodes, lambda, q, q_prime, r, r_prime };
        for (name, prob) in [
            ("r·r'·λ/N", p.p_shared()),
            ("r·(1−r')·λ/N", p.p_only()),
            ("(1−r)·r'·λ/N", p.p_only_prime()),
        ] {
            if !(0.0..=1.0).contains(&prob) {
                return Err(SamplingError::InvalidParameter(format!(
                    "edge probability {name} = {prob} falls outside [0, 1]"
                )));
            }
        }
        Ok(p)
    }

    pub fn s(&self) -> f64 {
        self.q * self.r
    }

    pub fn s_prime(&self) -> f64 {
        self.q_prime * self.r_prime
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams { lambda: self.lambda, s: self.s(), s_prime: self.s_prime() }
    }

    /// Shared-edge probability `r·r'·λ/N`.
    pub fn p_shared(&self) -> f64 {
        self.r * self.r_prime * self.lambda / self.n_nodes as f64
    }

    /// First-graph-only edge augmentation probability `r·(1−r')·λ/N`.
    pub fn p_only(&self) -> f64 {
        self.r * (1.0 - self.r_prime) * self.lambda / self.n_nodes as f64
    }

    /// Second-graph-only edge augmentation probability `(1−r)·r'·λ/N`.
    pub fn p_only_prime(&self) -> f64 {
        (1.0 - self.r) * self.r_prime * self.lambda / self.n_nodes as f64
    }
}

/// Simple undirected graph with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph { adj: vec![Vec::new(); n] }
    }

    /// Builds from an edge list; ignores self-loops and duplicate edges.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        let mut seen = HashSet::new();
        for (u, v) in edges {
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key) {
                adj[u as usize].push(v);
                adj[v as usize].push(u);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Graph { adj }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    /// All edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, nbrs) in self.adj.iter().enumerate() {
            for &v in nbrs {
                if (u as u32) < v {
                    out.push((u as u32, v));
                }
            }
        }
        out
    }
}

/// A correlated pair of graphs with planted ground truth.
///
/// `g_star` is the shared intersection graph on `n_star` nodes; node `i` of
/// `g_star` appears as `v_star[i]` in `g` and `v_star_prime[i]` in `g_prime`.
/// `sigma_star` lists the planted matching pairs `(v_star[i], v_star_prime[i])`.
#[derive(Clone, Debug)]
pub struct CorrelatedPair {
    pub g: Graph,
    pub g_prime: Graph,
    pub g_star: Graph,
    pub v_star: Vec<u32>,
    pub v_star_prime: Vec<u32>,
    pub sigma_star: Vec<(u32, u32)>,
    pub n_star: usize,
    pub n_plus: usize,
    pub n_plus_prime: usize,
}

/// Linear index of the unordered pair `(u, v)`, `u < v`: `v(v-1)/2 + u`.
/// Pairs with larger `v` occupy a contiguous upper range, which lets the
/// augmentation steps skip-sample over "pairs touching a new node" directly.
fn pair_decode(k: u64) -> (u32, u32) {
    // v = floor((1 + sqrt(1 + 8k)) / 2), then fix up rounding.
    let mut v = ((1.0 + (1.0 + 8.0 * k as f64).sqrt()) / 2.0) as u64;
    while v * (v - 1) / 2 > k {
        v -= 1;
    }
    while (v + 1) * v / 2 <= k {
        v += 1;
    }
    let u = k - v * (v - 1) / 2;
    (u as u32, v as u32)
}

/// Bernoulli(p) subset of the linear index range `[lo, hi)` via geometric
/// skipping — O(expected hits), not O(range).
fn skip_sample<R: Rng + ?Sized>(lo: u64, hi: u64, p: f64, rng: &mut R, mut emit: impl FnMut(u64)) {
    if p <= 0.0 || lo >= hi {
        return;
    }
    if p >= 1.0 {
        for k in lo..hi {
            emit(k);
        }
        return;
    }
    let ln_q = (1.0 - p).ln();
    let mut cur = lo;
    loop {
        let u: f64 = rng.gen(); // in [0, 1)
        let skip = ((1.0 - u).ln() / ln_q).floor() as u64;
        cur = match cur.checked_add(skip) {
            Some(c) => c,
            None => return,
        };
        if cur >= hi {
            return;
        }
        emit(cur);
        cur += 1;
    }
}

/// Erdős–Rényi graph: each unordered pair independently present with
/// probability `p`.
pub fn sample_er<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
    assert!((0.0..=1.0).contains(&p), "edge probability {p} outside [0, 1]");
    let m = n as u64 * (n as u64).saturating_sub(1) / 2;
    let mut edges = Vec::new();
    skip_sample(0, m, p, rng, |k| edges.push(pair_decode(k)));
    Graph::from_edges(n, edges)
}

fn sample_binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("validated binomial").sample(rng)
}

/// Samples the correlated pair model.
///
/// Steps, in fixed RNG order: intersection size `n* ~ Bin(N, qq')` and
/// intersection graph `ER(n*, rr'λ/N)`; first graph: node augmentation with
/// `n_+ ~ Bin(N, q(1−q'))` new nodes whose incident pairs appear with
/// probability `rr'λ/N`, then edge augmentation of all pairs with probability
/// `r(1−r')λ/N`; second graph: the independent mirror image with
/// `n'_+ ~ Bin(N, (1−q)q')` and `(1−r)r'λ/N`; finally both graphs are
/// relabeled by independent uniform permutations with the planted matching
/// recorded.
pub fn sample_cer<R: Rng>(params: &ModelParams, rng: &mut R) -> CorrelatedPair {
    let nn = params.n_nodes as u64;
    let n_star = sample_binomial(nn, params.q * params.q_prime, rng) as usize;
    let g_star = sample_er(n_star, params.p_shared(), rng);

    let star_pairs = n_star as u64 * (n_star as u64).saturating_sub(1) / 2;
    let side = |n_plus_p: f64, p_aug: f64, rng: &mut dyn rand::RngCore| {
        let n_plus = sample_binomial(nn, n_plus_p, rng) as usize;
        let n = n_star + n_plus;
        let all_pairs = n as u64 * (n as u64).saturating_sub(1) / 2;
        let mut edges: Vec<(u32, u32)> = g_star.edges();
        // Pairs touching at least one new node are exactly the linear index
        // range [star_pairs, all_pairs): new nodes carry the largest labels.
        skip_sample(star_pairs, all_pairs, params.p_shared(), rng, |k| {
            edges.push(pair_decode(k));
        });
        // Edge augmentation over all pairs; the union with existing edges
        // realizes "each absent pair added independently".
        skip_sample(0, all_pairs, p_aug, rng, |k| edges.push(pair_decode(k)));
        let graph = Graph::from_edges(n, edges);
        // Uniform relabeling; ground truth recorded through the permutation.
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.shuffle(rng);
        let relabeled = Graph::from_edges(
            n,
            graph.edges().into_iter().map(|(u, v)| (perm[u as usize], perm[v as usize])),
        );
        (relabeled, perm, n_plus)
    };

    let (g, perm, n_plus) = side(params.q * (1.0 - params.q_prime), params.p_only(), rng);
    let (g_prime, perm_prime, n_plus_prime) =
        side((1.0 - params.q) * params.q_prime, params.p_only_prime(), rng);

    let v_star: Vec<u32> = (0..n_star).map(|i| perm[i]).collect();
    let v_star_prime: Vec<u32> = (0..n_star).map(|i| perm_prime[i]).collect();
    let sigma_star = v_star.iter().copied().zip(v_star_prime.iter().copied()).collect();
    CorrelatedPair {
        g,
        g_prime,
        g_star,
        v_star,
        v_star_prime,
        sigma_star,
        n_star,
        n_plus,
        n_plus_prime,
    }
}

fn sample_poisson<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u64 {
    if mu <= 0.0 {
        return 0;
    }
    Poisson::new(mu).expect("validated poisson").sample(rng) as u64
}

fn sample_gw_inner<R: Rng + ?Sized>(
    mu: f64,
    depth: u32,
    budget: &mut u64,
    cap: u64,
    rng: &mut R,
    arena: &TreeArena,
) -> Result<CanonTreeId, SamplingError> {
    if *budget == 0 {
        return Err(SamplingError::Truncated { cap });
    }
    *budget -= 1;
    if depth == 0 {
        return Ok(arena.leaf());
    }
    let c = sample_poisson(mu, rng);
    let mut kids = Vec::with_capacity(c as usize);
    for _ in 0..c {
        kids.push(sample_gw_inner(mu, depth - 1, budget, cap, rng, arena)?);
    }
    Ok(arena.intern(kids))
}

/// Galton–Watson tree with `Poi(mu)` offspring, truncated at `depth`,
/// canonicalized. Fails if the sample would exceed `cap` nodes.
pub fn sample_gw_capped<R: Rng + ?Sized>(
    mu: f64,
    depth: u32,
    cap: u64,
    rng: &mut R,
    arena: &TreeArena,
) -> Result<CanonTreeId, SamplingError> {
    let mut budget = cap;
    sample_gw_inner(mu, depth, &mut budget, cap, rng, arena)
}

/// [`sample_gw_capped`] with the default node cap.
pub fn sample_gw<R: Rng + ?Sized>(
    mu: f64,
    depth: u32,
    rng: &mut R,
    arena: &TreeArena,
) -> Result<CanonTreeId, SamplingError> {
    sample_gw_capped(mu, depth, DEFAULT_NODE_CAP, rng, arena)
}

fn sample_corr_gw_inner<R: Rng + ?Sized>(
    tp: &TreeParams,
    depth: u32,
    budget: &mut u64,
    cap: u64,
    rng: &mut R,
    arena: &TreeArena,
) -> Result<(CanonTreeId, CanonTreeId), SamplingError> {
    if *budget == 0 {
        return Err(SamplingError::Truncated { cap });
    }
    *budget -= 1;
    if depth == 0 {
        return Ok((arena.leaf(), arena.leaf()));
    }
    let lam = tp.lambda;
    let (s, sp) = (tp.s, tp.s_prime);
    // Intersection children carry correlated subtrees on both sides.
    let shared = sample_poisson(lam * s * sp, rng);
    let mut kids = Vec::new();
    let mut kids_prime = Vec::new();
    for _ in 0..shared {
        let (a, b) = sample_corr_gw_inner(tp, depth - 1, budget, cap, rng, arena)?;
        kids.push(a);
        kids_prime.push(b);
    }
    // Side-only children carry independent plain branching subtrees.
    let extra = sample_poisson(lam * s * (1.0 - sp), rng);
    for _ in 0..extra {
        let mut sub = cap.min(*budget);
        let t = sample_gw_inner(lam * s, depth - 1, &mut sub, cap, rng, arena);
        *budget = sub;
        kids.push(t?);
    }
    let extra_prime = sample_poisson(lam * sp * (1.0 - s), rng);
    for _ in 0..extra_prime {
        let mut sub = cap.min(*budget);
        let t = sample_gw_inner(lam * sp, depth - 1, &mut sub, cap, rng, arena);
        *budget = sub;
        kids_prime.push(t?);
    }
    Ok((arena.intern(kids), arena.intern(kids_prime)))
}

/// Correlated tree pair: an intersection tree with `Poi(λss')` offspring,
/// augmented on each side by independent side-only children (`Poi(λs(1−s'))`
/// resp. `Poi(λs'(1−s))`) carrying plain `GW(λs)` resp. `GW(λs')` subtrees.
pub fn sample_corr_gw<R: Rng + ?Sized>(
    tp: &TreeParams,
    depth: u32,
    rng: &mut R,
    arena: &TreeArena,
) -> Result<(CanonTreeId, CanonTreeId), SamplingError> {
    sample_corr_gw_capped(tp, depth, DEFAULT_NODE_CAP, rng, arena)
}

/// [`sample_corr_gw`] with an explicit node cap (shared across the pair).
pub fn sample_corr_gw_capped<R: Rng + ?Sized>(
    tp: &TreeParams,
    depth: u32,
    cap: u64,
    rng: &mut R,
    arena: &TreeArena,
) -> Result<(CanonTreeId, CanonTreeId), SamplingError> {
    let mut budget = cap;
    sample_corr_gw_inner(tp, depth, &mut budget, cap, rng, arena)
}

/// Independent tree pair: `GW(λs) ⊗ GW(λs')`, both truncated at `depth`.
pub fn sample_ind_pair<R: Rng + ?Sized>(
    tp: &TreeParams,
    depth: u32,
    rng: &mut R,
    arena: &TreeArena,
) -> Result<(CanonTreeId, CanonTreeId), SamplingError> {
    let t = sample_gw(tp.lambda * tp.s, depth, rng, arena)?;
    let t_prime = sample_gw(tp.lambda * tp.s_prime, depth, rng, arena)?;
    Ok((t, t_prime))
}
