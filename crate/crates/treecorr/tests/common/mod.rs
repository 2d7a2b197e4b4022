//! Shared test helpers: an independent brute-force implementation of the
//! correlated and independent tree-pair laws, used as an oracle against the
//! recursive likelihood ratio.
//!
//! The correlated law at depth d+1 is a superposition of independent Poisson
//! counts over shapes: for each pair of depth-d shapes (τ, τ') the number of
//! shared child pairs is Poi(λss'·P^corr_d(τ, τ')); for each shape τ the
//! number of left-only children is Poi(λs(1−s')·GW_d^{(λs)}(τ)), and
//! symmetrically on the right. The probability of observing the child
//! multisets of (t, t') is therefore a convolution sum over all feasible
//! shared-count matrices Γ, with the remainders forced onto the one-sided
//! terms. This enumeration shares no code with the recursive ratio.

use std::collections::HashMap;
use treecorr::likelihood::gw_log_likelihood;
use treecorr::sampling::TreeParams;
use treecorr::treespace::{CanonTreeId, TreeArena};

pub struct BruteForceLaw<'a> {
    tp: TreeParams,
    arena: &'a TreeArena,
    memo: HashMap<(CanonTreeId, CanonTreeId, u32), f64>,
}

fn falling_weight(rate: f64, count: u32) -> f64 {
    // rate^count / count!, with 0^0 = 1.
    let mut w = 1.0;
    for i in 1..=count {
        w *= rate / i as f64;
    }
    w
}

impl<'a> BruteForceLaw<'a> {
    pub fn new(tp: TreeParams, arena: &'a TreeArena) -> Self {
        BruteForceLaw { tp, arena, memo: HashMap::new() }
    }

    /// `P^corr_d(t, t')`: probability that a correlated pair, read to depth
    /// `d`, equals the given unlabeled pair.
    pub fn corr_prob(&mut self, t: CanonTreeId, t_prime: CanonTreeId, d: u32) -> f64 {
        if d == 0 {
            return 1.0;
        }
        if let Some(&v) = self.memo.get(&(t, t_prime, d)) {
            return v;
        }
        let tp = self.tp;
        let (lam, s, sp) = (tp.lambda, tp.s, tp.s_prime);
        let rows = self.arena.child_multiset(t);
        let cols = self.arena.child_multiset(t_prime);

        // Rates of the three independent Poisson families.
        let mut gamma = vec![vec![0.0; cols.len()]; rows.len()];
        for (ri, &(tau, _)) in rows.iter().enumerate() {
            for (ci, &(tau_p, _)) in cols.iter().enumerate() {
                gamma[ri][ci] = lam * s * sp * self.corr_prob(tau, tau_p, d - 1);
            }
        }
        let delta: Vec<f64> = rows
            .iter()
            .map(|&(tau, _)| {
                lam * s * (1.0 - sp) * gw_log_likelihood(tau, d - 1, lam * s, self.arena).exp()
            })
            .collect();
        let delta_p: Vec<f64> = cols
            .iter()
            .map(|&(tau, _)| {
                lam * sp * (1.0 - s) * gw_log_likelihood(tau, d - 1, lam * sp, self.arena).exp()
            })
            .collect();
        let total_rate = lam * s * sp + lam * s * (1.0 - sp) + lam * sp * (1.0 - s);

        // Sum over all matrices Γ with row sums ≤ N_τ and column sums ≤ N'_τ',
        // cell by cell in row-major order; leftovers go to the one-sided terms.
        struct Ctx<'b> {
            rows: &'b [(CanonTreeId, u32)],
            cols: &'b [(CanonTreeId, u32)],
            gamma: &'b [Vec<f64>],
            delta: &'b [f64],
            delta_p: &'b [f64],
        }
        fn rec(cx: &Ctx, ri: usize, ci: usize, row_rem: u32, col_rem: &mut [u32], w: f64) -> f64 {
            if ri == cx.rows.len() {
                // All rows assigned; leftovers on the right are one-sided.
                let mut out = w;
                for (c, &rem) in col_rem.iter().enumerate() {
                    out *= falling_weight(cx.delta_p[c], rem);
                }
                return out;
            }
            if ci == cx.cols.len() {
                // Row finished; its leftover is left-only children.
                let w = w * falling_weight(cx.delta[ri], row_rem);
                let next_rem = if ri + 1 < cx.rows.len() { cx.rows[ri + 1].1 } else { 0 };
                return rec(cx, ri + 1, 0, next_rem, col_rem, w);
            }
            let mut total = 0.0;
            let max_here = row_rem.min(col_rem[ci]);
            for k in 0..=max_here {
                col_rem[ci] -= k;
                total += rec(
                    cx,
                    ri,
                    ci + 1,
                    row_rem - k,
                    col_rem,
                    w * falling_weight(cx.gamma[ri][ci], k),
                );
                col_rem[ci] += k;
            }
            total
        }
        let cx = Ctx { rows: &rows, cols: &cols, gamma: &gamma, delta: &delta, delta_p: &delta_p };
        let mut col_rem: Vec<u32> = cols.iter().map(|&(_, n)| n).collect();
        let first_row_rem = rows.first().map_or(0, |&(_, n)| n);
        let start = if rows.is_empty() {
            // No left children: everything on the right is one-sided.
            let mut w = 1.0;
            for (c, &(_, n)) in cols.iter().enumerate() {
                w *= falling_weight(delta_p[c], n);
            }
            w
        } else {
            rec(&cx, 0, 0, first_row_rem, &mut col_rem, 1.0)
        };
        let value = (-total_rate).exp() * start;
        self.memo.insert((t, t_prime, d), value);
        value
    }

    /// `P^ind_d(t, t') = GW_d^{(λs)}(t) · GW_d^{(λs')}(t')`.
    pub fn ind_prob(&self, t: CanonTreeId, t_prime: CanonTreeId, d: u32) -> f64 {
        (gw_log_likelihood(t, d, self.tp.lambda * self.tp.s, self.arena)
            + gw_log_likelihood(t_prime, d, self.tp.lambda * self.tp.s_prime, self.arena))
        .exp()
    }

    /// Brute-force likelihood ratio `P^corr_d / P^ind_d`.
    pub fn ratio(&mut self, t: CanonTreeId, t_prime: CanonTreeId, d: u32) -> f64 {
        self.corr_prob(t, t_prime, d) / self.ind_prob(t, t_prime, d)
    }
}
