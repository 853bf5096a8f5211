//! `quench`: batch runner for the quench-circuit simulator.

mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::run::Failure;

#[derive(Parser, Debug)]
#[command(name = "quench", version, about = "Simulate quench circuits on a spin-qubit array")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Chain length N.
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Angle range `start:stop:steps` in radians.
    #[arg(long, global = true)]
    theta: Option<String>,

    #[arg(long, global = true)]
    shots: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Disable noise: ideal gates, one exact evaluation per point.
    #[arg(long, global = true)]
    ideal: bool,

    /// Output file; relative paths resolve against QUENCH_OUTPUT_DIR when set.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads for shot evaluation; results do not depend on it.
    #[arg(long, global = true)]
    parallel: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Return probability sweep, per combo and averaged.
    Loschmidt {
        /// `all` or lists such as `2-3-4;3-4-5`.
        #[arg(long)]
        combos: Option<String>,
    },
    /// Magnetization sweep for chains inside qubits 2-5.
    Magnetization {
        #[arg(long)]
        combos: Option<String>,
    },
    /// Drive one qubit and record every readout observable.
    Rabi {
        #[arg(long)]
        qubit: Option<usize>,
    },
    /// Tomography of a prepared state.
    Tomo {
        /// quench, ghz or bell.
        #[arg(long)]
        target: Option<String>,
        /// Use exact probabilities instead of sampled counts.
        #[arg(long)]
        exact: bool,
    },
    /// Fixed versus per-batch thresholds on a drifting synthetic Rabi sweep.
    Rethreshold {
        /// Also write the raw voltage batches to this CSV file.
        #[arg(long)]
        voltages: Option<PathBuf>,
    },
    /// Return probability at one angle against N.
    FiniteSize {
        #[arg(long, default_value_t = 3)]
        n_min: usize,
        #[arg(long, default_value_t = 21)]
        n_max: usize,
        /// Angle in radians (defaults to π/2).
        #[arg(long)]
        angle: Option<f64>,
    },
    /// Period of each circuit stage with and without the entangling gates.
    Periodicity,
    /// Run the noiseless oracle suite.
    Validate,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run::dispatch(&cli.common, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Oracle(msg)) => {
            eprintln!("oracle violation: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(1)
        }
    }
}
