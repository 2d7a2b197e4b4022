//! Counts unlabeled rooted trees by size and shows the growth-ratio
//! estimates converging to the reciprocal of the radius of convergence.
//!
//! Run with: `cargo run --release --example otter_counts`

use treecorr::treespace::{count_by_size, otter_ratio, otter_ratio_corrected, OTTER_ALPHA};

fn main() {
    let max_n = 25;
    let counts = count_by_size(max_n as u32, max_n + 1);
    let raw = otter_ratio(max_n);
    let corrected = otter_ratio_corrected(max_n);
    println!("{:>3}  {:>16}  {:>10}  {:>10}", "n", "count", "ratio", "corrected");
    for n in 1..=max_n as usize {
        println!("{n:>3}  {:>16}  {:>10.6}  {:>10.6}", counts[n], raw[n - 1], corrected[n - 1]);
    }
    println!("\nlimit 1/alpha = {:.6}", 1.0 / OTTER_ALPHA);
}
