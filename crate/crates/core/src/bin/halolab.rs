fn main() {
    std::process::exit(halolab::cli::run_cli(std::env::args_os()));
}
