use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use misobc::cli::{run, Cli};
use misobc::SimError;
use std::io::ErrorKind as ErrorKind2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(4),
            };
        }
    };
    match run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        // A closed downstream pipe is not a failure of the run.
        Err(SimError::Io(e)) if e.kind() == ErrorKind2::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
