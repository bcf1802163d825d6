use anyhow::{bail, Context, Result};
use clap::Parser;

mod checkpoint;
mod cli;
mod commands;
mod csv;
mod data;
mod kv;
mod report;

use cli::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(&cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    init_workers(cli.workers)?;
    match &cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Run(args) => commands::run(args),
        Command::Fuse(args) => commands::fuse(args),
        Command::Roc(args) => commands::roc(args),
        Command::Report(args) => commands::report(args),
    }
}

/// Sizes the worker pool: the --workers flag wins, then CONTINUAL_WORKERS,
/// then the rayon default (available cores). Worker count never changes
/// results, only wall time.
fn init_workers(flag: Option<usize>) -> Result<()> {
    let workers = match flag {
        Some(n) => Some(n),
        None => match std::env::var("CONTINUAL_WORKERS") {
            Ok(text) => Some(
                text.parse::<usize>()
                    .with_context(|| format!("CONTINUAL_WORKERS={text:?}"))?,
            ),
            Err(std::env::VarError::NotPresent) => None,
            Err(err) => return Err(err).context("CONTINUAL_WORKERS"),
        },
    };
    if let Some(n) = workers {
        if n == 0 {
            bail!("worker count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing the worker pool")?;
    }
    Ok(())
}
