mod commands;
mod error;
mod reproduce;
mod scenario;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use oligonet::graph::DEFAULT_ENUMERATION_CAP;
use oligonet::stability::VerificationMode;

use commands::{Context, Format};
use error::CliError;
use scenario::Scenario;

/// Collaboration networks among Cournot competitors.
#[derive(Parser)]
#[command(name = "oligonet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Seed for sampled verification and random example graphs.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Largest firm count for exhaustive enumeration.
    #[arg(long, global = true, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,

    /// Exit with status 4 when the checked graph or class is not stable.
    #[arg(long, global = true)]
    assert_stable: bool,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Solver name; overrides the scenario's.
    #[arg(long, global = true)]
    solver: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for equilibrium quantities and profits on the scenario graph.
    Equilibrium,
    /// Check pairwise stability of the scenario graph.
    Stability,
    /// List every pairwise stable graph on the scenario's firms.
    Enumerate,
    /// Check that every realization of the target degrees is stable.
    VerifyTheorem,
    /// Evaluate the sufficient condition for nonnegative demands.
    Condition,
    /// Rebuild the five-firm worked example and its checks.
    ReproducePaper(reproduce::Args),
}

fn load(cli: &Cli) -> Result<Context, CliError> {
    let path = cli
        .scenario
        .as_deref()
        .ok_or_else(|| CliError::Validation("--scenario is required".into()))?;
    let mut scenario = Scenario::load(path)?;
    if let Some(name) = &cli.solver {
        scenario.solver = name.clone();
    }
    if let Some(seed) = cli.seed {
        if let Some(VerificationMode::Sampled { seed: s, .. }) = &mut scenario.mode {
            *s = seed;
        }
    }
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out_dir = commands::out_dir(
        cli.out.as_deref(),
        scenario.output.as_deref(),
        &base_dir,
        "out",
    );
    Ok(Context {
        scenario,
        base_dir,
        out_dir,
        format: cli.format,
        cap: cli.cap,
        assert_stable: cli.assert_stable,
    })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::ReproducePaper(args) => reproduce::run(
            args,
            cli.out.as_deref().unwrap_or(Path::new("reproduce-out")),
            cli.solver.as_deref(),
            cli.seed.unwrap_or(0),
            cli.cap,
        ),
        Command::Equilibrium => commands::equilibrium(&load(cli)?),
        Command::Stability => commands::stability(&load(cli)?),
        Command::Enumerate => commands::enumerate(&load(cli)?),
        Command::VerifyTheorem => commands::verify_theorem(&load(cli)?),
        Command::Condition => commands::condition(&load(cli)?),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
