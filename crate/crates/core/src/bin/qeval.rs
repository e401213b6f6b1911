fn main() {
    std::process::exit(qeval::cli::run_from_env());
}
