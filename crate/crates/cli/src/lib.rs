//! Command-line front end for `pfdr`.

pub mod args;
pub mod commands;
pub mod error;
pub mod figure;
pub mod output;
pub mod simulate;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pfdr", version, about = "Minimum data volume and power under a conditional pFDR criterion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact event probabilities, N* and V*.
    Exact(commands::PointArgs),
    /// Leading-term event probability, N* and V*.
    Asym(commands::PointArgs),
    /// Exact and leading-term N* and V* side by side.
    Volume(commands::PointArgs),
    /// Large-N power and pFDR of a thresholding procedure.
    Power(commands::PowerArgs),
    /// Power of the shifted procedure relative to the fixed one along a grid.
    Ratio(commands::RatioArgs),
    /// Monte Carlo simulation of the random-effects model.
    Simulate(simulate::SimulateArgs),
    /// Exact versus leading-term event probability along a shrinking-effect grid.
    Converge(commands::ConvergeArgs),
    /// Figure data as CSV (t, delta, value).
    Figure(figure::FigureArgs),
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Exact(a) => commands::exact(a),
        Command::Asym(a) => commands::asym(a),
        Command::Volume(a) => commands::volume(a),
        Command::Power(a) => commands::power(a),
        Command::Ratio(a) => commands::ratio(a),
        Command::Simulate(a) => simulate::simulate(a),
        Command::Converge(a) => commands::converge(a),
        Command::Figure(a) => figure::figure(a),
    }
}
