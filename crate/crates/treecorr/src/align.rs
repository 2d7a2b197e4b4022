//! Sparse graph alignment by local tree comparison: neighborhood extraction
//! with cycle detection, dangling trees, the candidate loop (three-way
//! matching of dangling-tree tests), conflict resolution into an injective
//! estimator, and the overlap / error-fraction metrics.
//!
//! A pair (i, j) is considered only when both radius-2d neighborhoods are
//! cycle-free and both nodes have at least three neighbors. It becomes a
//! candidate when the bipartite graph on their neighbors — with an edge
//! wherever the depth-(d−1) test accepts the two dangling trees — admits a
//! matching of size three.

use crate::likelihood::likelihood_ratio;
use crate::likelihood::LRCache;
use crate::sampling::Graph;
use crate::testing::{evaluate, TestSpec};
use crate::treespace::{CanonTreeId, TreeArena};
use rayon::prelude::*;
use std::collections::HashMap;

/// A depth-limited neighborhood: either a rooted tree together with the graph
/// nodes it covers (in BFS discovery order, root first), or a cycle flag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NeighborhoodView {
    Tree { tree: CanonTreeId, nodes: Vec<u32> },
    CycleDetected,
}

/// One pre-resolution candidate match with its score: the largest value `w`
/// such that the accepted dangling-tree pairs with log likelihood ratio ≥ w
/// still contain a matching of size three.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub i: u32,
    pub j: u32,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AlignDiagnostics {
    /// Nodes per side failing the degree-≥3 guard.
    pub low_degree_left: usize,
    pub low_degree_right: usize,
    /// Nodes per side whose radius-2d neighborhood contains a cycle.
    pub cyclic_left: usize,
    pub cyclic_right: usize,
    /// Eligible nodes per side (both guards passed).
    pub eligible_left: usize,
    pub eligible_right: usize,
    /// Pairs skipped because a likelihood evaluation hit a resource limit.
    pub skipped_pairs: usize,
}

#[derive(Clone, Debug)]
pub struct AlignmentResult {
    /// Injective partial map, sorted by left node.
    pub matches: Vec<(u32, u32)>,
    /// All candidates before conflict resolution.
    pub candidates: Vec<Candidate>,
    pub diagnostics: AlignDiagnostics,
}

/// BFS ball of the given radius around `i`, flagged as cyclic when the
/// induced subgraph on the visited nodes is not a tree.
pub fn extract_neighborhood(
    g: &Graph,
    i: u32,
    radius: u32,
    arena: &TreeArena,
) -> NeighborhoodView {
    assert!((i as usize) < g.n(), "node out of range");
    let mut dist: HashMap<u32, u32> = HashMap::from([(i, 0)]);
    let mut order = vec![i];
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        let du = dist[&u];
        if du == radius {
            continue;
        }
        for &w in g.neighbors(u) {
            if !dist.contains_key(&w) {
                dist.insert(w, du + 1);
                order.push(w);
            }
        }
    }
    // The ball is a tree iff its induced edge count is |nodes| - 1.
    let mut internal_edges = 0usize;
    for &u in &order {
        internal_edges += g.neighbors(u).iter().filter(|w| dist.contains_key(w)).count();
    }
    if internal_edges / 2 != order.len() - 1 {
        return NeighborhoodView::CycleDetected;
    }
    // Canonicalize bottom-up along reverse BFS order.
    let mut ids: HashMap<u32, CanonTreeId> = HashMap::new();
    for &u in order.iter().rev() {
        let du = dist[&u];
        let kids: Vec<CanonTreeId> = g
            .neighbors(u)
            .iter()
            .filter(|&&w| dist.get(&w) == Some(&(du + 1)))
            .map(|w| ids[w])
            .collect();
        ids.insert(u, arena.intern(kids));
    }
    NeighborhoodView::Tree { tree: ids[&i], nodes: order }
}

/// The depth-limited subtree rooted at `i_nb` pointing away from `i`:
/// nodes strictly closer to `i_nb` than to `i`, to `depth − 1` levels below
/// `i_nb`. The caller must have verified that the relevant neighborhood of
/// `i` is cycle-free.
pub fn dangling_tree(
    g: &Graph,
    i: u32,
    i_nb: u32,
    depth: u32,
    arena: &TreeArena,
) -> CanonTreeId {
    assert!(g.has_edge(i, i_nb), "dangling tree requires an edge ({i}, {i_nb})");
    assert!(depth >= 1, "dangling tree needs depth ≥ 1");
    fn build(g: &Graph, node: u32, parent: u32, remaining: u32, arena: &TreeArena) -> CanonTreeId {
        if remaining == 0 {
            return arena.leaf();
        }
        let kids: Vec<CanonTreeId> = g
            .neighbors(node)
            .iter()
            .filter(|&&w| w != parent)
            .map(|&w| build(g, w, node, remaining - 1, arena))
            .collect();
        arena.intern(kids)
    }
    build(g, i_nb, i, depth - 1, arena)
}

/// Per-node precomputation for one side: eligible nodes with their dangling
/// trees, plus guard counters.
struct SidePrep {
    eligible: Vec<(u32, Vec<CanonTreeId>)>,
    low_degree: usize,
    cyclic: usize,
}

fn prepare_side(g: &Graph, d: u32, arena: &TreeArena) -> SidePrep {
    let mut prep = SidePrep { eligible: Vec::new(), low_degree: 0, cyclic: 0 };
    for i in 0..g.n() as u32 {
        if g.degree(i) < 3 {
            prep.low_degree += 1;
            continue;
        }
        match extract_neighborhood(g, i, 2 * d, arena) {
            NeighborhoodView::CycleDetected => prep.cyclic += 1,
            NeighborhoodView::Tree { .. } => {
                let dts =
                    g.neighbors(i).iter().map(|&nb| dangling_tree(g, i, nb, d, arena)).collect();
                prep.eligible.push((i, dts));
            }
        }
    }
    prep
}

/// Maximum bipartite matching size by augmenting paths; `adj[k]` lists the
/// right-side endpoints of left node `k`.
fn max_matching(adj: &[Vec<usize>], n_right: usize) -> usize {
    let mut match_right = vec![usize::MAX; n_right];
    let mut size = 0;
    for start in 0..adj.len() {
        let mut seen = vec![false; n_right];
        if augment(start, adj, &mut match_right, &mut seen) {
            size += 1;
        }
    }
    size
}

fn augment(u: usize, adj: &[Vec<usize>], match_right: &mut [usize], seen: &mut [bool]) -> bool {
    for &v in &adj[u] {
        if !seen[v] {
            seen[v] = true;
            if match_right[v] == usize::MAX || augment(match_right[v], adj, match_right, seen) {
                match_right[v] = u;
                return true;
            }
        }
    }
    false
}

/// Max-min score of a size-3 matching: add accepted edges in decreasing
/// weight order until a matching of size 3 exists; the last added weight is
/// the best achievable minimum. Returns `None` when no size-3 matching exists.
fn three_matching_score(edges: &mut Vec<(f64, usize, usize)>, n_left: usize, n_right: usize) -> Option<f64> {
    if edges.len() < 3 {
        return None;
    }
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut adj = vec![Vec::new(); n_left];
    for &(w, k, l) in edges.iter() {
        adj[k].push(l);
        if max_matching(&adj, n_right) >= 3 {
            return Some(w);
        }
    }
    None
}

/// Greedy conflict resolution: candidates in descending score order (ties
/// broken by ascending (i, j)), skipping any whose endpoint is already used.
/// The result is injective in both directions.
pub fn resolve_candidates(candidates: &[Candidate]) -> Vec<(u32, u32)> {
    let mut order: Vec<&Candidate> = candidates.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.i.cmp(&b.i)).then(a.j.cmp(&b.j)));
    let mut used_left = std::collections::HashSet::new();
    let mut used_right = std::collections::HashSet::new();
    let mut matches = Vec::new();
    for c in order {
        if used_left.contains(&c.i) || used_right.contains(&c.j) {
            continue;
        }
        used_left.insert(c.i);
        used_right.insert(c.j);
        matches.push((c.i, c.j));
    }
    matches.sort_unstable();
    matches
}

/// Runs the alignment loop: for every eligible pair, accept as a candidate
/// when the dangling-tree test graph admits a size-3 matching, then resolve
/// candidates into an injective map.
pub fn mpalign(
    g: &Graph,
    g_prime: &Graph,
    d: u32,
    test: &TestSpec,
    cache: &LRCache,
    arena: &TreeArena,
) -> AlignmentResult {
    assert!(d >= 2, "alignment depth must be at least 2");
    assert_eq!(test.depth, d - 1, "test depth must be d − 1");
    let left = prepare_side(g, d, arena);
    let right = prepare_side(g_prime, d, arena);

    let per_left: Vec<(Vec<Candidate>, usize)> = left
        .eligible
        .par_iter()
        .map(|(i, dts_i)| {
            let mut cands = Vec::new();
            let mut skipped = 0usize;
            for (j, dts_j) in &right.eligible {
                let mut edges: Vec<(f64, usize, usize)> = Vec::new();
                let mut pair_failed = false;
                'grid: for (k, &a) in dts_i.iter().enumerate() {
                    for (l, &b) in dts_j.iter().enumerate() {
                        match evaluate(a, b, test, cache, arena) {
                            Ok(true) => {
                                let lr = match likelihood_ratio(a, b, test.depth, cache, arena) {
                                    Ok(v) => v,
                                    Err(_) => {
                                        pair_failed = true;
                                        break 'grid;
                                    }
                                };
                                edges.push((lr.ln(), k, l));
                            }
                            Ok(false) => {}
                            Err(_) => {
                                pair_failed = true;
                                break 'grid;
                            }
                        }
                    }
                }
                if pair_failed {
                    skipped += 1;
                    continue;
                }
                if let Some(score) = three_matching_score(&mut edges, dts_i.len(), dts_j.len()) {
                    cands.push(Candidate { i: *i, j: *j, score });
                }
            }
            (cands, skipped)
        })
        .collect();

    let mut candidates = Vec::new();
    let mut skipped_pairs = 0;
    for (cands, skipped) in per_left {
        candidates.extend(cands);
        skipped_pairs += skipped;
    }
    let matches = resolve_candidates(&candidates);
    AlignmentResult {
        matches,
        candidates,
        diagnostics: AlignDiagnostics {
            low_degree_left: left.low_degree,
            low_degree_right: right.low_degree,
            cyclic_left: left.cyclic,
            cyclic_right: right.cyclic,
            eligible_left: left.eligible.len(),
            eligible_right: right.eligible.len(),
            skipped_pairs,
        },
    }
}

/// Fraction of ground-truth nodes matched correctly:
/// `(1/n*)·|{i : σ̂(i) = σ*(i)}|`.
pub fn overlap(matches: &[(u32, u32)], sigma_star: &[(u32, u32)], n_star: u64) -> f64 {
    if n_star == 0 {
        return 0.0;
    }
    let truth: HashMap<u32, u32> = sigma_star.iter().copied().collect();
    let correct = matches.iter().filter(|(i, j)| truth.get(i) == Some(j)).count();
    correct as f64 / n_star as f64
}

/// Fraction of emitted matches that are wrong or outside the ground truth:
/// `(1/n)·|{i ∈ V̂ : i ∉ V* or σ̂(i) ≠ σ*(i)}|`.
pub fn error_fraction(matches: &[(u32, u32)], sigma_star: &[(u32, u32)], n: u64) -> f64 {
    assert!(n > 0, "error fraction needs a positive node count");
    let truth: HashMap<u32, u32> = sigma_star.iter().copied().collect();
    let wrong = matches.iter().filter(|(i, j)| truth.get(i) != Some(j)).count();
    wrong as f64 / n as f64
}
