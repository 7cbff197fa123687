use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use torque_track_cli::{commands, CliError};

/// Computed-torque control of planar serial manipulators.
#[derive(Parser)]
#[command(name = "torque-track", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print gains for the given settling times.
    Tune {
        /// Settling time in seconds; repeat or comma-separate for several joints.
        #[arg(
            long,
            required = true,
            value_delimiter = ',',
            allow_negative_numbers = true
        )]
        ts: Vec<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Run one scenario, write its trace and print a summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Trace CSV path (defaults to outputs.csv in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// SVG plot of error and torque.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run a one-parameter sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the dynamics of a model against reference computations.
    Validate {
        /// Model file (`{"gravity": .., "links": [..]}`); built-in models when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let mut stdout = std::io::stdout().lock();
    let result: Result<(), CliError> = match cli.command {
        Command::Tune { ts, json } => commands::tune(&ts, json, &mut stdout),
        Command::Simulate { config, out, plot } => {
            commands::simulate(&config, out.as_deref(), plot.as_deref(), &mut stdout)
        }
        Command::Sweep { config, out } => commands::sweep(&config, &out, &mut stdout),
        Command::Validate { config, samples } => {
            commands::validate(config.as_deref(), samples, &mut stdout)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
