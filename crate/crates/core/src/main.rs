fn main() {
    std::process::exit(cqdae::cli::main_with_args(std::env::args_os()));
}
