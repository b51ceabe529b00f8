fn main() {
    std::process::exit(chex::harness::cli::cli_run(std::env::args_os()));
}
