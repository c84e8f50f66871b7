fn main() {
    std::process::exit(klucrl::cli::run(std::env::args_os()));
}
