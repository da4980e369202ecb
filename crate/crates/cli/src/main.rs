//! `motimem` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 internal
//! invariant violation.

mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn init_pool(jobs: usize) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Encode(a) => {
            init_pool(a.jobs.jobs)?;
            commands::encode(&a)
        }
        Command::Decode(a) => {
            init_pool(a.jobs.jobs)?;
            commands::decode(&a)
        }
        Command::Metrics(a) => commands::metrics(&a),
        Command::Run(a) => {
            init_pool(a.common.jobs.jobs)?;
            commands::run(&a)
        }
        Command::Sweep(a) => {
            init_pool(a.common.jobs.jobs)?;
            commands::sweep(&a)
        }
        Command::Compare(a) => {
            init_pool(a.common.jobs.jobs)?;
            commands::compare(&a)
        }
        Command::GenCorpus(a) => commands::gen_corpus(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
