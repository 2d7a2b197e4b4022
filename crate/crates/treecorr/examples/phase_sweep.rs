//! Small KL-divergence sweep over the correlation strength: shows the
//! separation between weak and strong correlation growing with depth.
//!
//! Run with: `cargo run --release --example phase_sweep`

use treecorr::likelihood::LRCache;
use treecorr::sampling::TreeParams;
use treecorr::testing::estimate_kl;
use treecorr::treespace::TreeArena;

fn main() {
    let arena = TreeArena::new();
    let lambda = 4.0;
    let n_samples = 5_000;
    println!("lambda,ss,d,kl,kl_se");
    for s in [0.4, 0.6, 0.8, 0.9] {
        let tp = TreeParams::new(lambda, s, s).unwrap();
        let cache = LRCache::new(tp);
        for d in 1..=3u32 {
            let kl = estimate_kl(&tp, d, n_samples, 7_000 + d as u64, &cache, &arena).unwrap();
            println!("{lambda},{:.2},{d},{:.5},{:.5}", s * s, kl.estimate, kl.se);
        }
    }
}
