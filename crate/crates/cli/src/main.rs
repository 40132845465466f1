use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sdcoag::app::{run, Mode, RunOptions, Status};
use sdcoag::config::load_config;

#[derive(Parser)]
#[command(name = "sdcoag", about = "Truncated discrete coagulation solver and moment-bound checker")]
struct Cli {
    /// Directory for output files; overrides `output.dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Accepted for reproducibility scripts; the solver is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate and write the trajectory CSV.
    Simulate { config: PathBuf },
    /// Integrate, evaluate the configured bounds and write the JSON report.
    Check { config: PathBuf },
    /// Integrate at each size in `sweep.n_list` and classify the trend.
    Sweep { config: PathBuf },
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, path) = match cli.command {
        Command::Simulate { config } => (Mode::Simulate, config),
        Command::Check { config } => (Mode::Check, config),
        Command::Sweep { config } => (Mode::Sweep, config),
        Command::Version => {
            println!("sdcoag {}", env!("CARGO_PKG_VERSION"));
            return ExitCode::SUCCESS;
        }
    };
    let cfg = match load_config(&path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(Status::ConfigError.code() as u8);
        }
    };
    let opts = RunOptions { out_dir: cli.out_dir, quiet: cli.quiet };
    let status = run(&cfg, mode, &opts, std::io::stdout().lock());
    ExitCode::from(status.code() as u8)
}
