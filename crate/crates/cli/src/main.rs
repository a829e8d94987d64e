use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = rrr_cli::Cli::parse();
    match rrr_cli::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
