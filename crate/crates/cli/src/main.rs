use std::process::ExitCode;

use aep_cli::{exit_code, run, Args};
use clap::Parser;

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(report) => {
            print!("{}", report.summary);
            println!(
                "wrote {} files to {}",
                report.artifacts.len(),
                report.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("aep-decomp: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
