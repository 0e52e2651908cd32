fn main() {
    std::process::exit(modelprox::cli::run(std::env::args_os()));
}
