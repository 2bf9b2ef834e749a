fn main() {
    std::process::exit(fhspec_cli::run_cli(std::env::args_os()));
}
