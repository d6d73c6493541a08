//! `tabdistill` — distill small tabular datasets into a handful of synthetic
//! objects with per-step learning rates, then train and evaluate models on
//! the result.
//!
//! Subcommands cover the full pipeline: `datagen` → `distill` → `schedule` /
//! `train` / `eval` / `sweep` → `plot-export`. Each run resolves its
//! parameters from defaults, an optional JSON config file, `TABDISTILL_*`
//! environment variables, and flags (in that order of precedence), echoes
//! the resolved configuration into the output directory, and exits 0 on
//! success, 2 on validation errors, 3 on numerical aborts, and 4 when a
//! cross-evaluation completed with failed cells.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::Resolved;
use std::path::PathBuf;
use std::process::ExitCode;
use tabdistill::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tabdistill",
    version,
    about = "Distill tabular datasets into synthetic objects with learned step sizes"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct GlobalArgs {
    /// JSON config file of flat dotted keys, e.g. {"distill.outer_epochs": 10}
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts and the resolved-config echo
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<String>,
    /// Master seed; every random stream is derived from it
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on worker threads (0 = library default)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Force single-threaded execution
    #[arg(long, global = true)]
    pub strict_serial: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the two-moons dataset and write full/train/test CSVs
    Datagen(commands::datagen::DatagenArgs),
    /// Learn synthetic objects and per-step learning rates from a training CSV
    Distill(commands::distill::DistillArgs),
    /// Expand a replay strategy into a concrete learning-rate schedule
    Schedule(commands::schedule::ScheduleArgs),
    /// Train one model on real or distilled data and export its curves and grid
    Train(commands::train::TrainArgs),
    /// Cross-evaluate distilled datasets across architectures and strategies
    Eval(commands::eval::EvalArgs),
    /// Distill and evaluate across a range of one inner-loop parameter
    Sweep(commands::sweep::SweepArgs),
    /// Render CSV artifacts (datasets, grids, curves, schedules) as SVG
    PlotExport(commands::plot::PlotArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_numerical() { 3 } else { 2 })
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let resolved = resolve(cli)?;
    init_threads(&resolved)?;
    match &cli.command {
        Command::Datagen(_) => commands::datagen::execute(&resolved),
        Command::Distill(_) => commands::distill::execute(&resolved),
        Command::Schedule(_) => commands::schedule::execute(&resolved),
        Command::Train(_) => commands::train::execute(&resolved),
        Command::Eval(_) => commands::eval::execute(&resolved),
        Command::Sweep(_) => commands::sweep::execute(&resolved),
        Command::PlotExport(_) => commands::plot::execute(&resolved),
    }
}

/// Folds file, environment, and flag layers into one value map.
fn resolve(cli: &Cli) -> Result<Resolved> {
    match &cli.command {
        Command::Datagen(a) => commands::datagen::resolve(&cli.global, a),
        Command::Distill(a) => commands::distill::resolve(&cli.global, a),
        Command::Schedule(a) => commands::schedule::resolve(&cli.global, a),
        Command::Train(a) => commands::train::resolve(&cli.global, a),
        Command::Eval(a) => commands::eval::resolve(&cli.global, a),
        Command::Sweep(a) => commands::sweep::resolve(&cli.global, a),
        Command::PlotExport(a) => commands::plot::resolve(&cli.global, a),
    }
}

fn init_threads(r: &Resolved) -> Result<()> {
    let threads = if r.bool("strict_serial") { 1 } else { r.usize("jobs")? };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}
