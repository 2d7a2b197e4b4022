//! Runs the spectral verification oracles: orthogonality of the tree basis,
//! the diagonalization of the likelihood ratio, and the exact second-moment
//! series.
//!
//! Run with: `cargo run --release --example spectral_checks`

use treecorr::likelihood::LRCache;
use treecorr::sampling::TreeParams;
use treecorr::spectral::{
    second_moment_exact, verify_diagonalization, verify_orthogonality, Caps,
};
use treecorr::treespace::TreeArena;

fn main() {
    let arena = TreeArena::new();

    println!("orthogonality: Σ_t GW_d(t)·f_β(t)·f_β'(t) = 1{{β = β'}}");
    for (d, caps) in [(1u32, Caps { beta_size_cap: 4, t_size_cap: 40 }),
                      (2, Caps { beta_size_cap: 3, t_size_cap: 8 })] {
        for mu in [0.5, 1.0] {
            let r = verify_orthogonality(d, mu, caps, &arena).unwrap();
            println!(
                "  d={d} μ={mu}: max dev {:.3e}, max budget {:.3e}, within budget: {}",
                r.max_deviation, r.max_budget, r.all_within_budget
            );
        }
    }

    println!("\ndiagonalization: L_d(t,t') = Σ_β √(ss')^{{|β|−1}} f_β(t) f_β(t')");
    for (lambda, s, sp) in [(1.0, 0.5, 0.5), (1.2, 0.3, 0.6)] {
        let tp = TreeParams::new(lambda, s, sp).unwrap();
        let cache = LRCache::new(tp);
        for d in 0..=2u32 {
            let caps = if d == 2 {
                Caps { beta_size_cap: 8, t_size_cap: 6 }
            } else {
                Caps { beta_size_cap: 26, t_size_cap: 26 }
            };
            let r = verify_diagonalization(d, &tp, caps, &cache, &arena).unwrap();
            println!(
                "  λ={lambda} s={s} s'={sp} d={d}: max dev {:.3e}, within budget: {}",
                r.max_deviation, r.all_within_budget
            );
        }
    }

    println!("\nsecond moment: E^ind[L_d²] = Σ_n |X_d^(n)| (ss')^(n−1)");
    for d in 1..=3u32 {
        for ss in [0.1, 0.2, 0.3] {
            match second_moment_exact(d, ss, 400) {
                Ok((v, tail)) => println!("  d={d} ss'={ss}: {v:.9} (tail ≤ {tail:.1e})"),
                Err(e) => println!("  d={d} ss'={ss}: {e}"),
            }
        }
    }
}
