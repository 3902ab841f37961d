fn main() {
    std::process::exit(glmct::cli::run(std::env::args_os()));
}
