use std::process::ExitCode;

use clap::Parser;
use coxcontract::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COXCONTRACT_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if !out.summary.is_empty() {
                println!("{}", out.summary);
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
