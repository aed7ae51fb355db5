use std::process::ExitCode;

use clap::Parser;
use ksreg_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ksreg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
