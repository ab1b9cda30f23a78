fn main() {
    std::process::exit(gfuse::cli::run(std::env::args_os()));
}
