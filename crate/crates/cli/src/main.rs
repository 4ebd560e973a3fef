fn main() {
    std::process::exit(ghostimg_cli::run_args(std::env::args()));
}
