fn main() {
    std::process::exit(treenas::cli::cli(std::env::args_os()));
}
