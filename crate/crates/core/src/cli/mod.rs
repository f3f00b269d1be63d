//! Batch runner: `starlike <command> --config FILE --out DIR`.
//!
//! Each command reads its own section of the TOML config plus `[graph]` (or
//! `graph_file`) and writes `<command>.csv`, a JSON mirror
//! `<command>.json`, plot triples `<command>_plot.csv` and, for some
//! commands, `<command>_summary.json`. Row order is fixed by the input grid
//! and never by thread scheduling.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

pub use commands::{run, Command, RunError};

#[derive(Debug, Parser)]
#[command(name = "starlike", about = "Spectral experiments on Jacobi operators over star-like graphs")]
pub struct Args {
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub verbose: bool,
}

/// Exit status: 0 on success, 2 for configuration errors, 1 otherwise.
pub fn execute(args: &Args) -> ExitCode {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    let result = pool.install(|| -> Result<Vec<PathBuf>, RunError> {
        let (config, spec) = config::load(&args.config)?;
        let built = spec.build()?;
        if args.verbose {
            let g = built.graph();
            eprintln!("{}: |K| = {}, m = {}", args.command.name(), g.compact_size(), g.m());
        }
        let artifacts = run(args.command, &config, &spec, &built)?;
        artifacts
            .write(&args.out)
            .map_err(|e| RunError::Config(config::ConfigError(format!("--out {}: {e}", args.out.display()))))
    });
    match result {
        Ok(paths) => {
            if args.verbose {
                for p in paths {
                    eprintln!("wrote {}", p.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e @ RunError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn main() -> ExitCode {
    execute(&Args::parse())
}
