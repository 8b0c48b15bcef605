//! `errw`: simulations, bounds and checks for the linearly edge-reinforced
//! random walk.

mod bound;
mod graphs;
mod measure;
mod output;
mod plot;
mod simulate;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "errw", version, about = "Edge-reinforced random walk toolkit")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo hitting probabilities or a single trajectory.
    Simulate(simulate::SimulateArgs),
    /// The bound chain for a lattice point at a given level.
    Bound(bound::BoundArgs),
    /// Export the potential on a periodic box.
    Phi(bound::PhiArgs),
    /// Evaluate the mixing density at given environments.
    Density(measure::DensityArgs),
    /// Deformed H-expectation and entropy estimates on a gamma grid.
    Variational(measure::VariationalArgs),
    /// Sample environments and estimate moments.
    Mcmc(measure::McmcArgs),
    /// Run the acceptance suite.
    Verify(verify::VerifyArgs),
}

/// Raised by `verify` when a criterion fails.
#[derive(Debug)]
pub struct AcceptanceFailure(pub Vec<u8>);

impl std::fmt::Display for AcceptanceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "acceptance criteria failed: {:?}", self.0)
    }
}

impl std::error::Error for AcceptanceFailure {}

fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    if err.downcast_ref::<AcceptanceFailure>().is_some() {
        return (3, "acceptance");
    }
    match err.downcast_ref::<errw_core::Error>() {
        Some(errw_core::Error::Diagnostic(_)) => (2, "diagnostic"),
        Some(errw_core::Error::Io(_)) => (1, "io"),
        Some(_) => (1, "validation"),
        None if err.downcast_ref::<std::io::Error>().is_some() => (1, "io"),
        None => (1, "validation"),
    }
}

fn report(code: u8, kind: &str, message: String) -> ExitCode {
    let body = json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.threads == 0 {
        anyhow::bail!(errw_core::Error::InvalidParameter(
            "--threads must be at least 1".into()
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()?;
    match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Bound(a) => bound::run_bound(a),
        Command::Phi(a) => bound::run_phi(a),
        Command::Density(a) => measure::run_density(a),
        Command::Variational(a) => measure::run_variational(a),
        Command::Mcmc(a) => measure::run_mcmc(a),
        Command::Verify(a) => verify::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(1, "validation", e.to_string().trim_end().to_string()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = classify(&e);
            report(code, kind, format!("{e:#}"))
        }
    }
}
