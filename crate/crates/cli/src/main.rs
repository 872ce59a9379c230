fn main() {
    std::process::exit(accessbound_cli::run(std::env::args_os()));
}
