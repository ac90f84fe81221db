fn main() {
    std::process::exit(metaforge::cli::run(std::env::args_os()));
}
