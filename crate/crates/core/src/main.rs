fn main() {
    std::process::exit(cuspwave::cli::run(std::env::args_os()));
}
