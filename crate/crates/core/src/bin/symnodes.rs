use std::process::ExitCode;

fn main() -> ExitCode {
    symnodes::cli::main_with_args(std::env::args_os())
}
