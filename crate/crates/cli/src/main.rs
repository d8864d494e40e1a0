use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(wavefactor_cli::run(std::env::args_os()))
}
