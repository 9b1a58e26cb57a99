fn main() {
    std::process::exit(fadesched::cli::run(std::env::args_os()));
}
