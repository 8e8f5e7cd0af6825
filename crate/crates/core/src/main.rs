fn main() {
    std::process::exit(ergm_search::cli::main());
}
