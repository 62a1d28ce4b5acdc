use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(degenlab::cli::run(std::env::args_os()))
}
