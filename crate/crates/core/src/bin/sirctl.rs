use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sirmpc::scenario::{run_scenario, ScenarioConfig, ScenarioError, ScenarioKind};

#[derive(Parser)]
#[command(
    name = "sirctl",
    version,
    about = "SIR epidemic simulation and distancing control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate with a constant input.
    Simulate(Source),
    /// Apply one distancing interval.
    SingleInterval(Source),
    /// Compute and apply the quasi-optimal single interval.
    OptimalInterval(Source),
    /// Run the receding-horizon controller.
    Mpc(Source),
    /// Uncontrolled trajectories from several starts.
    PhasePortrait(Source),
    /// Tabulate the final susceptible fraction over initial conditions.
    Sweep(Source),
}

#[derive(Args)]
struct Source {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled scenario name, e.g. fig4_ipp005.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides `output` in the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(command: Command) -> Result<Vec<PathBuf>, ScenarioError> {
    let (expected, src) = match command {
        Command::Simulate(s) => (ScenarioKind::Uncontrolled, s),
        Command::SingleInterval(s) => (ScenarioKind::SingleInterval, s),
        Command::OptimalInterval(s) => (ScenarioKind::OptimalInterval, s),
        Command::Mpc(s) => (ScenarioKind::Mpc, s),
        Command::PhasePortrait(s) => (ScenarioKind::PhasePortrait, s),
        Command::Sweep(s) => (ScenarioKind::SInfinitySweep, s),
    };
    let config = match (&src.config, &src.preset) {
        (Some(path), _) => ScenarioConfig::from_path(path)?,
        (None, Some(name)) => ScenarioConfig::from_preset(name)?,
        (None, None) => unreachable!("clap enforces one source"),
    };
    if config.kind() != expected {
        return Err(ScenarioError::Config {
            line: None,
            message: format!(
                "scenario kind is \"{}\" but this subcommand runs \"{}\"",
                config.kind().name(),
                expected.name()
            ),
        });
    }
    let out = src
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    run_scenario(&config, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sirctl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
