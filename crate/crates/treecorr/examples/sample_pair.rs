//! Samples a correlated Erdős–Rényi graph pair and prints summary statistics
//! of the two sides, their shared core, and the ground-truth matching.
//!
//! Run with: `cargo run --release --example sample_pair`

use treecorr::sampling::{sample_cer, ModelParams};
use treecorr::seeding::derive_rng;

fn main() {
    let params = ModelParams::new(1_000, 4.0, 0.9, 0.85, 0.8, 0.9).unwrap();
    let mut rng = derive_rng(12345, 0, 0);
    let pair = sample_cer(&params, &mut rng);

    println!("model: N = {}, λ = {}", params.n_nodes, params.lambda);
    println!("  s = q·r   = {:.4}", params.s());
    println!("  s' = q'·r' = {:.4}", params.s_prime());
    println!();
    println!("left graph:   {} nodes, {} edges", pair.g.n(), pair.g.edge_count());
    println!("right graph:  {} nodes, {} edges", pair.g_prime.n(), pair.g_prime.edge_count());
    println!("shared core:  {} nodes, {} edges", pair.n_star, pair.g_star.edge_count());
    println!("left-only augmented nodes:  {}", pair.n_plus);
    println!("right-only augmented nodes: {}", pair.n_plus_prime);
    println!("ground-truth matching size: {}", pair.sigma_star.len());

    let mean_deg =
        |g: &treecorr::sampling::Graph| 2.0 * g.edge_count() as f64 / g.n().max(1) as f64;
    println!();
    println!("mean degree left:  {:.3}", mean_deg(&pair.g));
    println!("mean degree right: {:.3}", mean_deg(&pair.g_prime));
}
