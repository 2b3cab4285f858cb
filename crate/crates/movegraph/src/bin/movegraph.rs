fn main() {
    std::process::exit(movegraph::cli::run(std::env::args_os()));
}
