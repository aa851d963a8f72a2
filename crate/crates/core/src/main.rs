fn main() {
    std::process::exit(bellman_bmo::cli::run(std::env::args_os()));
}
