fn main() {
    std::process::exit(bdfpt::cli::main_with_args(std::env::args_os()));
}
