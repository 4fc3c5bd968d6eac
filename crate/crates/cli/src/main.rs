use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pgas_mc::{configure_threads, run_config, simulate_dataset, validate_config, CliError, RunOptions};

/// Particle Gibbs with ancestor sampling: batch experiment runner.
#[derive(Parser)]
#[command(name = "pgas-mc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write chain.csv, diagnostics.csv and summary.json.
    Run {
        config: PathBuf,
        /// Independent chains, run in parallel with split seeds.
        #[arg(long, default_value_t = 1)]
        chains: usize,
        /// Also write trace and autocorrelation plots as SVG.
        #[arg(long)]
        plot: bool,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Simulate a data set from a reference model (lgss, sv, degenerate, sir).
    Simulate {
        model: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Number of time steps (model default when omitted).
        #[arg(long)]
        length: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are configuration errors.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    configure_threads()?;
    match command {
        Command::Run { config, chains, plot, out } => {
            if chains == 0 {
                return Err(CliError::config("--chains", "must be at least 1"));
            }
            for p in run_config(&config, &RunOptions { chains, plot, out })? {
                println!("wrote {}", p.display());
            }
        }
        Command::Validate { config } => {
            validate_config(&config)?;
            println!("OK");
        }
        Command::Simulate { model, seed, out, length } => {
            simulate_dataset(&model, seed, &out, length)?;
            println!("wrote {}", out.join("data.csv").display());
        }
    }
    Ok(())
}
