fn main() {
    std::process::exit(covertrain::cli::run(std::env::args_os()));
}
