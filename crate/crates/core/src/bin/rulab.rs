fn main() {
    std::process::exit(rulab::cli::run(std::env::args_os()));
}
