//! Command line tool, model file formats and the remote backend for
//! draft-and-judge decoding. The sampling engine itself lives in
//! `judged-decode-core`.

pub mod backend;
pub mod cli;
pub mod commands;
pub mod error;
pub mod model_file;
pub mod prompts;
pub mod records;
pub mod remote;
pub mod verify;

pub use backend::Backend;
pub use error::CliError;
pub use remote::RemoteSource;

/// Runs a parsed command line.
pub fn run(cli: cli::Cli) -> Result<(), CliError> {
    match cli.command {
        cli::Command::Generate(a) => commands::generate(&a),
        cli::Command::Verify(a) => commands::verify(&a),
        cli::Command::Sweep(a) => commands::sweep(&a),
        cli::Command::Bench(a) => commands::bench(&a),
    }
}
