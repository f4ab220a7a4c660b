fn main() {
    std::process::exit(homscatter::cli::main_with_args(std::env::args_os()));
}
