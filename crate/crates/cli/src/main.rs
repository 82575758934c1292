fn main() {
    std::process::exit(lookalike_cli::run(std::env::args_os()));
}
