fn main() {
    std::process::exit(wall::cli::run_from(std::env::args_os()));
}
