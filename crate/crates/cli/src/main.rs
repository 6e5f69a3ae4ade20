fn main() {
    std::process::exit(cfista_cli::run(std::env::args_os()));
}
