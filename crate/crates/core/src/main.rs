use std::process::ExitCode;

use clap::Parser;

use cpcdma_harq::cli::{exit_code, resolve, run, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    let result = resolve(&args).and_then(|m| run(&m));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
