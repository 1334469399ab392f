use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(neurocap::cli::run(std::env::args_os()))
}
