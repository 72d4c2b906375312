use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(uvol_cli::run(std::env::args_os()))
}
