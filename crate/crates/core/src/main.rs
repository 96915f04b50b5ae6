fn main() {
    std::process::exit(cacelab::report::cli::main_with_args(std::env::args_os()));
}
