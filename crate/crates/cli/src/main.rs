fn main() {
    std::process::exit(maxent_cli::run(std::env::args_os()));
}
