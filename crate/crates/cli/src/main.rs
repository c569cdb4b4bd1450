//! `cvcluster`: synthesize, verify and decompose continuous-variable cluster
//! circuits, and simulate teleportation through them.
//!
//! Exit status: 0 success, 1 a residual out of tolerance or a numerical
//! failure, 2 invalid input.

mod commands;
mod input;
mod table;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cvcluster::Error;

use commands::Status;

#[derive(Debug, Parser)]
#[command(name = "cvcluster", version, about = "Continuous-variable cluster state synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build squeezers plus one interferometer for a graph.
    Synth(commands::SynthArgs),
    /// Simulate a circuit and compare nullifier variances with the closed form.
    Verify(commands::VerifyArgs),
    /// Factor an interferometer into beam splitters, Fourier gates and phases.
    Decompose(commands::DecomposeArgs),
    /// Teleport a coherent state through chain3, diamond or multirail clusters.
    Teleport(commands::TeleportArgs),
    /// Print the Gram matrix of a graph and optionally its vector factor.
    Gram(commands::GramArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Decomposition { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::DegenerateMeasurement { .. }
            | Error::InvalidCircuit { .. },
        ) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Verify(a) => commands::verify(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Teleport(a) => commands::teleport(a),
        Command::Gram(a) => commands::gram(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::OutOfTolerance) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
