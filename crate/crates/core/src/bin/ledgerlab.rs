fn main() -> std::process::ExitCode {
    ledgerlab::cli::main_with_args(std::env::args_os())
}
