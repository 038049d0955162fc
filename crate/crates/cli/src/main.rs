use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfpsrl_cli::{cmd_run, cmd_verify, CliError, Overrides};

#[derive(Parser)]
#[command(name = "mfpsrl", version, about = "Posterior-sampling learners in action-coupled mean-field games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its traces.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        window: Option<usize>,
        /// Keep agent 0's sampled models so value_gap.csv is filled.
        #[arg(long)]
        retain_models: bool,
    },
    /// Check a run directory for a mean-field equilibrium.
    Verify {
        #[arg(long)]
        run: PathBuf,
        /// Defaults to the run's ε.
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MFPSRL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MFPSRL_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run {
            scenario,
            out,
            episodes,
            agents,
            seed,
            epsilon,
            window,
            retain_models,
        } => {
            let overrides = Overrides {
                episodes,
                agents,
                seed,
                epsilon,
                window,
                retain_models,
            };
            cmd_run(&scenario, &out, &overrides, &mut stdout)
        }
        Command::Verify { run, tol } => cmd_verify(&run, tol, &mut stdout).map(|_| ()),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
