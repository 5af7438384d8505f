fn main() {
    std::process::exit(prodcat::cli::run(std::env::args_os()));
}
