use std::process::ExitCode;

use clap::Parser;
use judged_decode::cli::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match judged_decode::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("judged-decode: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
