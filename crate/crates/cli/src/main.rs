use std::process::ExitCode;

fn main() -> ExitCode {
    dpa_cli::run_cli(std::env::args_os())
}
