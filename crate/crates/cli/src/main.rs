use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nfdof_core::experiment::{run_experiment, ExperimentConfig, RunOptions};
use nfdof_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "nfdof", about = "Near-field degrees-of-freedom experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides NFDOF_OUT and the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// Print the toolkit version.
    Version,
}

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Version => {
            println!("nfdof {}", nfdof_core::VERSION);
            Ok(())
        }
        Command::Validate { config } => ExperimentConfig::from_path(&config).map(|c| {
            println!("{}: ok ({})", config.display(), c.experiment.as_str());
        }),
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => ExperimentConfig::from_path(&config).and_then(|c| {
            if threads == Some(0) {
                return Err(Error::Config("--threads must be at least 1".into()));
            }
            let outcome = run_experiment(&c, &RunOptions { out_dir: out, seed, threads })?;
            for f in &outcome.files {
                println!("{}", f.display());
            }
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
