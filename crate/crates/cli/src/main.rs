//! `specreg`: crosstalk curves, Ramsey and cluster simulations, spectral and
//! PSF fitting, ZPL distribution sampling and register-yield sweeps.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use commands::Context;

#[derive(Debug, Parser)]
#[command(name = "specreg", version, about)]
struct Cli {
    /// JSON config for the subcommand; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, env = "SPECREG_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Seed for every random draw; defaults to 20190305.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print a summary of the results to stderr.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    Crosstalk(commands::crosstalk::CrosstalkArgs),
    Ramsey(commands::ramsey::RamseyArgs),
    Cluster(commands::cluster::ClusterArgs),
    FitPle(commands::fit::FitPleArgs),
    Localize(commands::fit::LocalizeArgs),
    Yield(commands::yield_sweep::YieldArgs),
    SampleDist(commands::sample::SampleArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Context { config: cli.config, out_dir: cli.out_dir, seed: cli.seed, verbose: cli.verbose };
    let result = match cli.command {
        Command::Crosstalk(a) => commands::crosstalk::run(&ctx, a),
        Command::Ramsey(a) => commands::ramsey::run(&ctx, a),
        Command::Cluster(a) => commands::cluster::run(&ctx, a),
        Command::FitPle(a) => commands::fit::run_ple(&ctx, a),
        Command::Localize(a) => commands::fit::run_localize(&ctx, a),
        Command::Yield(a) => commands::yield_sweep::run(&ctx, a),
        Command::SampleDist(a) => commands::sample::run(&ctx, a),
    };
    match result {
        Ok(out) => {
            for path in &out.written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
