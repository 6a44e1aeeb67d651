//! Batch front-end: `solve`, `check`, `estimate`, `blowdown`, `sweep` and
//! `audit`, each writing `report.json` plus CSV data into `--out`.
//!
//! Exit codes: 0 when every checked property held, 2 when the computation
//! finished but a property failed, 1 on any operational error.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::Parser;

use config::{Command, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hessian_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::VerificationFailed => 2,
        }
    }

    pub fn from_verified(ok: bool) -> Self {
        if ok {
            Status::Ok
        } else {
            Status::VerificationFailed
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hessian-lab", version, about = "Solve and probe Hessian equations F(D²u) = 1")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

/// Runs one invocation and returns its exit code; messages go to stderr.
pub fn run(cli: Cli) -> i32 {
    match try_run(cli) {
        Ok((status, summary)) => {
            eprintln!("{summary}");
            status.exit_code()
        }
        Err(e) => {
            eprintln!("hessian-lab: error: {e}");
            1
        }
    }
}

fn try_run(cli: Cli) -> Result<(Status, String), CliError> {
    let base = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
            Settings::from_json(&text)?
        }
        None => Settings::default(),
    };
    let settings = base.overlay(cli.settings);
    let config = config::resolve(cli.command, &settings)?;
    let outcome = if cli.command == Command::Sweep {
        commands::sweep(&config, &settings)?
    } else {
        commands::execute(&config)?
    };
    outcome.artifacts.commit(&config.out)?;
    Ok((outcome.status, format!("{} -> {}", outcome.summary, config.out.display())))
}
