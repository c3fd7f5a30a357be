//! Entry point: parse, resolve, dispatch, map errors to exit codes.
//!
//! Usage errors exit with clap's code 2; every other failure class has
//! its own code, documented in [`svdmarg_cli::error`]. Success means
//! the requested output was produced.

use clap::Parser;

use svdmarg_cli::config::{self, Settings};
use svdmarg_cli::error::CliError;
use svdmarg_cli::opts::{self, Cli, Command};
use svdmarg_cli::{commands, Result};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("svdmarg: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => Settings::empty(),
    };
    cfg.check_keys(&opts::ALL_KEYS)?;

    if let Some(threads) = opts::resolve_threads(cli.threads, &cfg)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    }

    match cli.command {
        Command::Fit(args) => commands::cmd_fit(&opts::resolve_fit(args, &cfg)?),
        Command::Bench(args) => commands::cmd_bench(&opts::resolve_bench(args, &cfg)?),
        Command::Gen(args) => commands::cmd_gen(&opts::resolve_gen(args, &cfg)?),
        Command::Sample(args) => commands::cmd_sample(&opts::resolve_sample(args, &cfg)?),
    }
}
