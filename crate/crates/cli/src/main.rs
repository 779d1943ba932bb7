use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(hemfair_cli::run(std::env::args_os()))
}
