//! Command-line front end: `synth`, `verify`, `simulate` and `compare`.
//!
//! Exit codes: 0 success or certified, 1 usage, 2 infeasible or not
//! certified, 3 parse or I/O failure.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod trace_io;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{CompareArgs, SimulateArgs, SynthArgs, VerifyArgs};
pub use error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "hinf", version, about = "Delay-robust H-infinity filter design and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design a filter and write the gains artifact.
    Synth {
        config: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        tau_max: Option<f64>,
        /// Search for the smallest certified gamma instead.
        #[arg(long)]
        min_gamma: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Re-certify stored gains.
    Verify {
        gains: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        tau_max: Option<f64>,
    },
    /// Simulate one run and write the trace as CSV.
    Simulate {
        gains: PathBuf,
        config: PathBuf,
        /// Constant delay [s]; overrides the configured profile.
        #[arg(long)]
        delay: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Paired H-infinity vs Kalman runs over delays and seeds.
    Compare {
        gains: PathBuf,
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.2])]
        delays: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Synth {
            config,
            gamma,
            tau_max,
            min_gamma,
            output,
        } => commands::cmd_synth(
            &SynthArgs {
                config,
                gamma,
                tau_max,
                min_gamma,
                output,
            },
            out,
            err,
        )
        .map(|_| ()),
        Command::Verify {
            gains,
            gamma,
            tau_max,
        } => commands::cmd_verify(
            &VerifyArgs {
                gains,
                gamma,
                tau_max,
            },
            out,
        )
        .map(|_| ()),
        Command::Simulate {
            gains,
            config,
            delay,
            seed,
            output,
            plot,
        } => commands::cmd_simulate(
            &SimulateArgs {
                gains,
                config,
                delay,
                seed,
                output,
                plot,
            },
            out,
            err,
        ),
        Command::Compare {
            gains,
            config,
            delays,
            seeds,
            output,
        } => commands::cmd_compare(
            &CompareArgs {
                gains,
                config,
                delays,
                seeds,
                output,
            },
            out,
            err,
        )
        .map(|_| ()),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    exit::OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    exit::USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
