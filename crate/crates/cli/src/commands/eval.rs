//! `tabdistill eval` — the full comparison matrix: every distilled source ×
//! replay strategy × architecture, plus an original-data baseline row, with
//! convergence curves and a median-model decision grid per cell.

use super::{
    apply_global, declare_strategy_keys, grid_bounds, load_dataset, parse_arch_list, sanitize,
    strategy_from_name,
};
use crate::config::Resolved;
use crate::GlobalArgs;
use clap::Args;
use std::collections::BTreeMap;
use std::path::Path;
use tabdistill::data::{Dataset, SplitTag};
use tabdistill::distill::{self, SyntheticData};
use tabdistill::eval::{
    cross_eval, decision_grid, median_model, train_on_distilled, train_on_real, write_curves_csv,
    write_grid_csv, write_matrix_csv, write_matrix_json, CrossEvalCell, CrossEvalConfig,
};
use tabdistill::net::ParamVector;
use tabdistill::schedule::StrategyChoice;
use tabdistill::{Error, Result};

#[derive(Args)]
pub struct EvalArgs {
    /// Distilled JSON files, comma separated, each `path` or `name=path`
    #[arg(long)]
    pub distilled: Option<String>,
    /// Standardized training CSV for the original-data baseline
    #[arg(long)]
    pub train: Option<String>,
    /// Standardized test CSV
    #[arg(long)]
    pub test: Option<String>,
    /// Include the original-data baseline row (true/false)
    #[arg(long)]
    pub include_original: Option<bool>,
    /// Architectures to train, comma separated
    #[arg(long)]
    pub archs: Option<String>,
    /// Replay strategies, comma separated from raw, s1, s2, s3
    #[arg(long)]
    pub strategies: Option<String>,
    /// Restarts per distilled cell
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Restarts for the original-data baseline
    #[arg(long)]
    pub real_restarts: Option<usize>,
    /// Epochs for the original-data baseline
    #[arg(long)]
    pub real_epochs: Option<usize>,
    /// Learning rate for the original-data baseline
    #[arg(long)]
    pub real_lr: Option<f64>,
    /// Minibatch size for the original-data baseline
    #[arg(long)]
    pub real_batch: Option<usize>,
    /// Bootstrap resamples for the confidence intervals
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Decision-grid resolution per axis
    #[arg(long)]
    pub grid_resolution: Option<usize>,
    /// Total epochs for strategy 1
    #[arg(long)]
    pub total_epochs: Option<usize>,
    /// Warmup base learning rate for strategy 1
    #[arg(long)]
    pub base_lr: Option<f64>,
    /// Warmup length in epochs for strategy 1
    #[arg(long)]
    pub warm_epochs: Option<usize>,
    /// Per-repetition decay factor for strategies 2 and 3
    #[arg(long)]
    pub decay: Option<f64>,
    /// Full-program repetitions for strategy 2
    #[arg(long)]
    pub s2_reps: Option<usize>,
    /// Appended last-epoch repetitions for strategy 3
    #[arg(long)]
    pub s3_reps: Option<usize>,
}

pub fn resolve(global: &GlobalArgs, args: &EvalArgs) -> Result<Resolved> {
    let mut r = Resolved::new("eval");
    r.string("eval.distilled", "out/distilled.json");
    r.string("eval.train", "out/train.csv");
    r.string("eval.test", "out/test.csv");
    r.boolean("eval.include_original", true);
    r.string("eval.archs", "1layer,2layer,4layer");
    r.string("eval.strategies", "raw,s1,s2,s3");
    r.int("eval.restarts", 10);
    r.int("eval.real_restarts", 25);
    r.int("eval.real_epochs", 500);
    r.float("eval.real_lr", 0.05);
    r.int("eval.real_batch", 64);
    r.int("eval.resamples", 10_000);
    r.int("eval.grid_resolution", 200);
    declare_strategy_keys(&mut r, "eval");
    apply_global(&mut r, global)?;
    r.flag_str("eval.distilled", args.distilled.as_deref());
    r.flag_str("eval.train", args.train.as_deref());
    r.flag_str("eval.test", args.test.as_deref());
    r.flag_bool("eval.include_original", args.include_original);
    r.flag_str("eval.archs", args.archs.as_deref());
    r.flag_str("eval.strategies", args.strategies.as_deref());
    r.flag_usize("eval.restarts", args.restarts);
    r.flag_usize("eval.real_restarts", args.real_restarts);
    r.flag_usize("eval.real_epochs", args.real_epochs);
    r.flag_f64("eval.real_lr", args.real_lr);
    r.flag_usize("eval.real_batch", args.real_batch);
    r.flag_usize("eval.resamples", args.resamples);
    r.flag_usize("eval.grid_resolution", args.grid_resolution);
    r.flag_usize("eval.total_epochs", args.total_epochs);
    r.flag_f64("eval.base_lr", args.base_lr);
    r.flag_usize("eval.warm_epochs", args.warm_epochs);
    r.flag_f64("eval.decay", args.decay);
    r.flag_usize("eval.s2_reps", args.s2_reps);
    r.flag_usize("eval.s3_reps", args.s3_reps);
    Ok(r)
}

/// Parses `path` or `name=path` tokens into named distilled sources.
fn parse_sources(spec: &str) -> Result<Vec<(String, SyntheticData)>> {
    let mut sources = Vec::new();
    for tok in spec.split(',').filter(|t| !t.trim().is_empty()) {
        let tok = tok.trim();
        let (name, path) = match tok.split_once('=') {
            Some((name, path)) => (name.trim().to_string(), path.trim()),
            None => {
                let stem = Path::new(tok)
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or(tok);
                (stem.to_string(), tok)
            }
        };
        if name.is_empty() || name == "original" {
            return Err(Error::InvalidConfig(format!(
                "invalid distilled source name `{name}` (empty and `original` are reserved)"
            )));
        }
        if sources.iter().any(|(n, _)| *n == name) {
            return Err(Error::InvalidConfig(format!(
                "duplicate distilled source name `{name}`; disambiguate with name=path"
            )));
        }
        sources.push((name, distill::read_json(Path::new(path))?));
    }
    if sources.is_empty() {
        return Err(Error::InvalidConfig("no distilled sources given".into()));
    }
    Ok(sources)
}

/// Retrains the cell's median restart to recover its parameters for the grid.
fn median_theta(
    cell: &CrossEvalCell,
    sources: &[(String, SyntheticData)],
    strategies: &BTreeMap<String, StrategyChoice>,
    train: Option<&Dataset>,
    test: &Dataset,
    config: &CrossEvalConfig,
) -> Result<ParamVector> {
    let report = cell.report.as_ref().expect("only successful cells have grids");
    let seed = report.per_restart[median_model(report)?].seed;
    if cell.source == "original" {
        let train = train.expect("original cells require the training set");
        let model = train_on_real(
            &cell.arch,
            train,
            test,
            config.real_epochs,
            config.real_lr,
            config.real_batch,
            seed,
        )?;
        Ok(model.theta)
    } else {
        let syn = &sources
            .iter()
            .find(|(n, _)| *n == cell.source)
            .expect("cell source names come from `sources`")
            .1;
        let choice = &strategies[&cell.strategy];
        let model = train_on_distilled(&cell.arch, syn, &choice.expand(syn)?, test, seed)?;
        Ok(model.theta)
    }
}

pub fn execute(r: &Resolved) -> Result<u8> {
    let out = r.prepare_out()?;
    let sources = parse_sources(r.str("eval.distilled"))?;
    let test = load_dataset(r.str("eval.test"), SplitTag::Test)?;
    let train = if r.bool("eval.include_original") {
        Some(load_dataset(r.str("eval.train"), SplitTag::Train)?)
    } else {
        None
    };

    let mut strategy_by_label = BTreeMap::new();
    let mut strategies = Vec::new();
    for name in r.str("eval.strategies").split(',').filter(|t| !t.trim().is_empty()) {
        let choice = strategy_from_name(r, "eval", name)?;
        if strategy_by_label.insert(choice.label(), choice.clone()).is_none() {
            strategies.push(choice);
        }
    }
    let config = CrossEvalConfig {
        archs: parse_arch_list(r.str("eval.archs"))?,
        strategies,
        distilled_restarts: r.usize("eval.restarts")?,
        real_restarts: r.usize("eval.real_restarts")?,
        real_epochs: r.usize("eval.real_epochs")?,
        real_lr: r.f64("eval.real_lr"),
        real_batch: r.usize("eval.real_batch")?,
        bootstrap_resamples: r.usize("eval.resamples")?,
        seed: r.u64("seed")?,
    };

    let matrix = cross_eval(&sources, train.as_ref(), &test, &config)?;
    write_matrix_json(&matrix, &out.join("matrix.json"))?;
    write_matrix_csv(&matrix, &out.join("matrix.csv"))?;

    let curves_dir = out.join("curves");
    let grids_dir = out.join("grids");
    std::fs::create_dir_all(&curves_dir)?;
    std::fs::create_dir_all(&grids_dir)?;
    let bounds = grid_bounds(&test);
    let resolution = r.usize("eval.grid_resolution")?;

    let mut failures = Vec::new();
    for cell in &matrix.cells {
        let name = format!(
            "{}_{}_{}",
            sanitize(&cell.source),
            sanitize(if cell.strategy == "-" { "original" } else { &cell.strategy }),
            sanitize(&cell.arch.label()),
        );
        match &cell.report {
            Some(report) => {
                write_curves_csv(report, &curves_dir.join(format!("{name}.csv")))?;
                let theta = median_theta(cell, &sources, &strategy_by_label, train.as_ref(), &test, &config)?;
                let grid = decision_grid(&cell.arch, &theta, bounds, resolution)?;
                write_grid_csv(&grid, &grids_dir.join(format!("{name}.csv")))?;
                let rep = report;
                println!(
                    "{:<24} {:<10} {:<8} {:.4} ± {:.4}  [{:.4}, {:.4}]  ({} restarts)",
                    cell.source, cell.strategy, cell.arch.label(),
                    rep.mean, rep.std, rep.ci95.0, rep.ci95.1, cell.restarts,
                );
            }
            None => {
                let why = cell.error.clone().unwrap_or_else(|| "unknown error".into());
                println!(
                    "{:<24} {:<10} {:<8} FAILED: {why}",
                    cell.source, cell.strategy, cell.arch.label(),
                );
                failures.push(format!("{name}: {why}"));
            }
        }
    }

    if failures.is_empty() {
        Ok(0)
    } else {
        eprintln!("{} of {} cells failed:", failures.len(), matrix.cells.len());
        for f in &failures {
            eprintln!("  {f}");
        }
        Ok(4)
    }
}
