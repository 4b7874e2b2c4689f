use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(detbound_cli::run(std::env::args_os()) as u8)
}
