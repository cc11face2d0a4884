//! `warefollow`: scenario runs, offline tracking over detection logs and
//! potential-field dumps.

mod commands;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "WAREFOLLOW_OUT_DIR";

#[derive(Parser)]
#[command(name = "warefollow", about = "Warehouse person-following simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios and write ticks, metrics and a manifest.
    Run(RunArgs),
    /// Run the tracker alone over a detection log.
    Track(TrackArgs),
    /// Sample the potential field of a scenario on a grid.
    Field(FieldArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Scenario file or builtin name (S1, S2, S3). Repeat for a batch.
    #[arg(long, required = true)]
    pub scenario: Vec<String>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
    /// Also write an SVG of shelves, walking routes and the robot path.
    #[arg(long)]
    pub plot: bool,
    /// Simulation step in seconds; durations are kept in seconds.
    #[arg(long)]
    pub dt_override: Option<f64>,
    /// Worker threads for batches.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args)]
pub struct TrackArgs {
    /// Detection log CSV.
    #[arg(long)]
    pub detections: PathBuf,
    /// Tracker parameters as JSON; missing fields take defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FieldArgs {
    /// Scenario file or builtin name.
    #[arg(long)]
    pub scenario: String,
    /// Samples per side.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    /// Goal as `x,y`; defaults to the target's last waypoint.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub goal: Option<(f64, f64)>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
    /// Also write an SVG heatmap.
    #[arg(long)]
    pub plot: bool,
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(x)?, num(y)?))
}

fn version() -> String {
    format!(
        "{} (scenario schema {})",
        env!("CARGO_PKG_VERSION"),
        warefollow::sim::SCHEMA
    )
}

fn main() -> ExitCode {
    let matches = Cli::command().version(version()).get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let outcome = match &cli.command {
        Command::Run(args) => commands::run(args),
        Command::Track(args) => commands::track(args),
        Command::Field(args) => commands::field(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
