fn main() {
    std::process::exit(simdm::cli::run(std::env::args_os()));
}
