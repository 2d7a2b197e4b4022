//! Evaluates the depth-d likelihood ratio between the correlated and
//! independent tree-pair laws for a few hand-picked tree shapes.
//!
//! Run with: `cargo run --release --example likelihood_ratio`

use treecorr::likelihood::{likelihood_ratio, LRCache};
use treecorr::sampling::TreeParams;
use treecorr::treespace::TreeArena;

fn main() {
    let arena = TreeArena::new();
    let tp = TreeParams::new(1.5, 0.8, 0.7).unwrap();
    let cache = LRCache::new(tp);

    let shapes = ["()", "(())", "(()())", "((())())", "(((())))"];
    println!("parameters: λ = {}, s = {}, s' = {}", tp.lambda, tp.s, tp.s_prime);
    for d in 1..=3u32 {
        println!("\ndepth {d}: log L_d(t, t')");
        print!("{:>12}", "");
        for b in shapes {
            print!("{b:>12}");
        }
        println!();
        for a in shapes {
            let t = arena.parse_parens(a).unwrap();
            print!("{a:>12}");
            for b in shapes {
                let t_prime = arena.parse_parens(b).unwrap();
                let l = likelihood_ratio(t, t_prime, d, &cache, &arena).unwrap();
                print!("{:>12.4}", l.ln());
            }
            println!();
        }
    }
    println!("\ncache holds {} memoized entries", cache.len());
}
