//! `chg`: query, validate, merge and simulate constraint hypergraph models.

mod commands;
mod exit;
mod inputs;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use exit::Failure;

#[derive(Parser)]
#[command(
    name = "chg",
    version,
    about = "Constraint hypergraph models from the command line"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one node and print its value.
    Solve(SolveArgs),
    /// Solve one node over consecutive frames.
    Series(SeriesArgs),
    /// Check a model for structural problems.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Combine two models along shared nodes.
    Merge(MergeArgs),
    /// Repeat a stochastic solve with consecutive seeds.
    Montecarlo(MonteCarloArgs),
    /// Microgrid scenarios.
    #[command(subcommand)]
    Microgrid(MicrogridCommand),
}

#[derive(Args)]
struct Query {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    target: String,
    /// Known value, `node=value`; repeatable.
    #[arg(long = "input", value_name = "K=V")]
    inputs: Vec<String>,
    /// Type override for an input, `node=bool|int|real|text`.
    #[arg(long = "input-type", value_name = "K=TYPE")]
    input_types: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Structured,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    query: Query,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Print the solution tree.
    #[arg(long)]
    explain: bool,
}

#[derive(Args)]
struct SeriesArgs {
    #[command(flatten)]
    query: Query,
    #[arg(long)]
    frames: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG line chart destination.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct MergeArgs {
    first: PathBuf,
    second: PathBuf,
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
    /// Node of the second model identified with one of the first,
    /// `second=first`; repeatable. Without it, equal ids are shared.
    #[arg(long = "share", value_name = "B=A")]
    shares: Vec<String>,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    query: Query,
    #[arg(long)]
    runs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Islanded,
    Connected,
}

#[derive(Subcommand)]
enum MicrogridCommand {
    /// Simulate a grid hour by hour.
    Run(RunArgs),
    /// Write the grid model and its data tables.
    Export(ExportArgs),
}

#[derive(Args)]
struct GridSource {
    /// Utility connection; defaults to the grid description's own setting.
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Grid description as JSON; the built-in demo grid when absent.
    #[arg(long, conflicts_with = "model")]
    spec: Option<PathBuf>,
    /// Exported microgrid model whose description and tables to use.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    grid: GridSource,
    #[arg(long)]
    hours: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG chart of actor power.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Measured irradiance CSV (hour_index, ghi) replacing synthetic data.
    #[arg(long)]
    solar: Option<PathBuf>,
    /// Measured building load CSV (hour_index, normal_kw, lights_kw,
    /// equipment_kw) replacing synthetic data.
    #[arg(long)]
    load: Option<PathBuf>,
    /// Print node and edge counts by category to stderr.
    #[arg(long)]
    report: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    grid: GridSource,
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::Status::Usage as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}

pub(crate) type Outcome = Result<(), Failure>;
