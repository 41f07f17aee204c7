//! Command-line front end for `klconc`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 exact enumeration over the
//! outcome cap, 3 a verification property failed.

mod args;
mod commands;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

pub enum CliError {
    Invalid(anyhow::Error),
    Cap(String),
}

impl From<klconc::Error> for CliError {
    fn from(e: klconc::Error) -> Self {
        match e {
            klconc::Error::CapExceeded { .. } => CliError::Cap(e.to_string()),
            other => CliError::Invalid(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Invalid(e)
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let start = Instant::now();
    let g = &cli.global;
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(CliError::Invalid(anyhow::anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(anyhow::Error::from)?;
    }
    let cfg = commands::load_constants(g)?;
    let emission = match &cli.command {
        Command::Exact(a) => commands::exact(a)?,
        Command::Bound(a) => commands::bound(a, &cfg)?,
        Command::Mc(a) => commands::mc(a, &cfg)?,
        Command::Verify(a) => commands::verify(a, &cfg)?,
        Command::Threshold(a) => commands::threshold(a, &cfg)?,
    };
    let body = emission.render(g.format)?;
    output::write(g.output.as_deref(), &body)?;
    if g.annotate {
        if let Some(path) = &g.output {
            output::annotate(path, start.elapsed(), g.threads)?;
        }
    }
    Ok(!emission.failed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(CliError::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Cap(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
