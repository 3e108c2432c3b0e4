use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(boundarykit::cli::run(std::env::args_os()))
}
