//! Runs the built-in verification-oracle suite through the CLI layer and
//! prints the resulting table (the same thing `treecorr oracle` emits).
//!
//! Run with: `cargo run --release --example oracle_suite`

fn main() {
    let args: Vec<String> =
        ["treecorr", "oracle"].iter().map(|s| s.to_string()).collect();
    let mut out = std::io::stdout();
    if let Err(e) = treecorr::cli::run_with(&args, &mut out) {
        eprintln!("oracle suite reported: {e}");
        std::process::exit(2);
    }
}
