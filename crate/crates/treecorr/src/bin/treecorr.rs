fn main() {
    std::process::exit(treecorr::cli::run());
}
