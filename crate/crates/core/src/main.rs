fn main() {
    std::process::exit(regretlab::harness::cli::main_with_args(std::env::args_os()));
}
