use std::process::ExitCode;

use clap::Parser;
use mmrope_lab::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match mmrope_lab::run(cli.command) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            println!("wrote {}", report.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
