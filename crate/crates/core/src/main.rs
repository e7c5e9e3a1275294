fn main() -> std::process::ExitCode {
    ecfsense::cli::main_with_args(std::env::args_os())
}
