use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dncbeta::cli::run(std::env::args_os()) as u8)
}
