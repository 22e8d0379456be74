fn main() {
    std::process::exit(contprio::cli::main_with_args(std::env::args_os()));
}
