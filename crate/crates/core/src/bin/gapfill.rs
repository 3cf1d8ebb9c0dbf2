fn main() {
    std::process::exit(gapfill::cli::run_cli(std::env::args_os()));
}
