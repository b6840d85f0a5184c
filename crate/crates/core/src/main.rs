fn main() {
    std::process::exit(cqed::cli::run(std::env::args_os()));
}
