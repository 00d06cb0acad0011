//! `soft-ess`: evolutionarily stable arrival times under a random disturbance.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod output;
mod scenario;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{climate, ess, fitness, simulate, sweep};

#[derive(Debug, Parser)]
#[command(name = "soft-ess", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the equilibrium: ess.csv and summary.json.
    Ess(ess::EssArgs),
    /// Equilibrium coefficients over a grid of (a, p): sweep.csv.
    Sweep(sweep::SweepArgs),
    /// Fitness profile of a strategy and its equilibrium certificate.
    Fitness(fitness::FitnessArgs),
    /// Fitness of a strategy when the disturbance changes or p moves.
    Climate(climate::ClimateArgs),
    /// Monte Carlo estimates and the best-response dynamic.
    Simulate(simulate::SimulateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ess(args) => ess::run(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Fitness(args) => fitness::run(args),
        Command::Climate(args) => climate::run(args),
        Command::Simulate(args) => simulate::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("soft-ess: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
