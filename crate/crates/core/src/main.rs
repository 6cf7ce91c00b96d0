fn main() {
    std::process::exit(feraug::cli::run(std::env::args_os()));
}
