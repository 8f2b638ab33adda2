use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = wlrgs::cli::Cli::parse();
    match wlrgs::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
