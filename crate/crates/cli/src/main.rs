fn main() {
    std::process::exit(mgcheck_cli::main_with_args(std::env::args_os()));
}
