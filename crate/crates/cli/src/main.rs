use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slabqed_cli::{pipeline, Arm, CliResult, RunKind, Scenario};

/// Emitter in a lossy dielectric slab: spectral densities, sum rules and
/// bath dynamics.
///
/// Exit codes: 0 success, 2 invalid scenario, 3 tolerance not met,
/// 4 numerical failure, 5 i/o error.
#[derive(Parser)]
#[command(name = "slabqed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate f_M, f_S and f_eq (spectra.csv).
    Spectra(Common),
    /// Check the sum rule on a uniform grid (sumrule.csv).
    Sumrule(Common),
    /// Propagate one arm; the eq bath when the scenario says
    /// `run = "simulate_eq_bath"`, otherwise the two baths.
    Simulate(Common),
    /// Propagate both arms and report their equivalence gap.
    Compare(Common),
    /// Run whatever the scenario's `run` key names.
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to `output.dir` of the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace a scenario value, e.g. `--override bath.n_modes=128`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("slabqed: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    let (common, verb) = match command {
        Command::Spectra(c) => (c, Some(RunKind::Spectra)),
        Command::Sumrule(c) => (c, Some(RunKind::Sumrule)),
        Command::Simulate(c) => (c, Some(RunKind::SimulateTwoBath)),
        Command::Compare(c) => (c, Some(RunKind::Compare)),
        Command::Run(c) => (c, None),
    };
    let scenario = Scenario::load(&common.scenario, &common.overrides)?;
    let out = common.out.clone().unwrap_or_else(|| scenario.output.dir.clone());
    let o = &common.overrides;
    match verb {
        Some(RunKind::Spectra) => pipeline::spectra(&scenario, &out, o),
        Some(RunKind::Sumrule) => pipeline::sumrule(&scenario, &out, o),
        Some(RunKind::Compare) => pipeline::compare(&scenario, &out, o),
        Some(_) => {
            let arm = if scenario.run == RunKind::SimulateEqBath {
                Arm::EqBath
            } else {
                Arm::TwoBath
            };
            pipeline::simulate(&scenario, arm, &out, o)
        }
        None => pipeline::run(&scenario, &out, o),
    }
}
