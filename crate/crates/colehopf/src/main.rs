//! Thin command-line front end: `run` executes a configured experiment,
//! `validate` checks a config without running.  Exit codes: 0 success,
//! 2 config error, 3 numerical assertion failure, 4 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use colehopf::cli::{parse_config, run};
use colehopf::Error;

#[derive(Parser)]
#[command(
    name = "colehopf",
    version,
    about = "Viscous Burgers flows on metric graphs and gasket approximations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by a config file and write CSV artifacts.
    Run {
        /// Path to a TOML experiment config.
        config: PathBuf,
        /// Output directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random seed (overrides the config's `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Linear-algebra thread cap (default 1 for reproducible timing).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a config without running it.
    Validate {
        /// Path to a TOML experiment config.
        config: PathBuf,
    },
}

fn execute() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed, threads } => {
            // Cap the BLAS pool before the first LAPACK call; experiments
            // are deterministic and single-threaded by default.
            let threads = threads.unwrap_or(1).max(1);
            std::env::set_var("OPENBLAS_NUM_THREADS", threads.to_string());
            std::env::set_var("OMP_NUM_THREADS", threads.to_string());
            let mut cfg = parse_config(&config)?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let outcome = run(&cfg)?;
            println!("{}", outcome.summary);
            println!(
                "wrote {} file(s) to {}: {}",
                outcome.files.len(),
                outcome.out_dir.display(),
                outcome.files.join(", ")
            );
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = parse_config(&config)?;
            println!("OK: valid {} config", cfg.experiment.name());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
