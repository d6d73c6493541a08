//! Restart aggregation and the cross-architecture evaluation matrix.

use super::{bootstrap_ci, train_on_distilled, train_on_real, TrainedModel};
use crate::data::Dataset;
use crate::distill::SyntheticData;
use crate::error::{Error, Result};
use crate::net::ArchSpec;
use crate::schedule::StrategyChoice;
use crate::seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One training run inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartResult {
    pub seed: u64,
    pub final_accuracy: f64,
    pub final_logloss: f64,
    pub accuracy_curve: Vec<f64>,
    pub logloss_curve: Vec<f64>,
}

/// Aggregated restart statistics for one (data, strategy, architecture)
/// combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_restart: Vec<RestartResult>,
    pub mean: f64,
    /// Population standard deviation over restarts.
    pub std: f64,
    pub ci95: (f64, f64),
    pub fingerprint: String,
}

impl EvalReport {
    /// Computes mean, population std, and the 95% bootstrap interval from
    /// raw restart results. A single restart degenerates to a point
    /// interval; otherwise the interval is widened, if needed, to include
    /// the sample mean so `lo ≤ mean ≤ hi` always holds.
    pub fn aggregate(
        per_restart: Vec<RestartResult>,
        fingerprint: String,
        resamples: usize,
        bootstrap_seed: u64,
    ) -> Result<Self> {
        if per_restart.is_empty() {
            return Err(Error::InvalidConfig("no restarts to aggregate".into()));
        }
        let accs: Vec<f64> = per_restart.iter().map(|r| r.final_accuracy).collect();
        let n = accs.len() as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let ci95 = if accs.len() == 1 {
            (mean, mean)
        } else {
            let (lo, hi) = bootstrap_ci(&accs, 0.95, resamples, bootstrap_seed)?;
            (lo.min(mean), hi.max(mean))
        };
        Ok(Self {
            per_restart,
            mean,
            std,
            ci95,
            fingerprint,
        })
    }

    pub fn restarts(&self) -> usize {
        self.per_restart.len()
    }
}

/// Settings for a full cross-evaluation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvalConfig {
    pub archs: Vec<ArchSpec>,
    pub strategies: Vec<StrategyChoice>,
    /// Restarts per distilled cell.
    pub distilled_restarts: usize,
    /// Restarts for the original-data row.
    pub real_restarts: usize,
    pub real_epochs: usize,
    pub real_lr: f64,
    pub real_batch: usize,
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl CrossEvalConfig {
    /// Reference settings: 10 distilled / 25 real restarts, 500 real
    /// epochs at lr 0.05, batch 64, 10,000 bootstrap resamples.
    pub fn defaults(archs: Vec<ArchSpec>, strategies: Vec<StrategyChoice>, seed: u64) -> Self {
        Self {
            archs,
            strategies,
            distilled_restarts: 10,
            real_restarts: 25,
            real_epochs: 500,
            real_lr: 0.05,
            real_batch: 64,
            bootstrap_resamples: 10_000,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.archs.is_empty() {
            return Err(Error::InvalidConfig("no test architectures".into()));
        }
        if self.distilled_restarts < 2 || self.real_restarts < 2 {
            return Err(Error::InvalidConfig("restarts must be >= 2".into()));
        }
        if self.bootstrap_resamples < 1000 {
            return Err(Error::InvalidConfig("resamples must be >= 1000".into()));
        }
        Ok(())
    }
}

/// One matrix cell. A failed cell carries its error text instead of a
/// report; other cells are unaffected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvalCell {
    pub source: String,
    pub strategy: String,
    pub arch: ArchSpec,
    pub restarts: usize,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEvalMatrix {
    pub cells: Vec<CrossEvalCell>,
}

impl CrossEvalMatrix {
    pub fn cell(&self, source: &str, strategy: &str, arch: &ArchSpec) -> Option<&CrossEvalCell> {
        self.cells
            .iter()
            .find(|c| c.source == source && c.strategy == strategy && &c.arch == arch)
    }

    pub fn has_failures(&self) -> bool {
        self.cells.iter().any(|c| c.error.is_some())
    }
}

enum CellJob<'a> {
    Real,
    Distilled {
        syn: &'a SyntheticData,
        strategy: &'a StrategyChoice,
    },
}

/// Runs every (data source × strategy × architecture) combination with
/// independent derived seeds. When `train` is given, an `original` row
/// (strategy `-`) is evaluated first with `train_on_real`.
///
/// Restarts run on the rayon pool; results are aggregated in restart order,
/// so the matrix is independent of thread count.
pub fn cross_eval(
    sources: &[(String, SyntheticData)],
    train: Option<&Dataset>,
    test: &Dataset,
    config: &CrossEvalConfig,
) -> Result<CrossEvalMatrix> {
    config.validate()?;
    let mut jobs: Vec<(String, String, &ArchSpec, CellJob)> = Vec::new();
    if train.is_some() {
        for arch in &config.archs {
            jobs.push(("original".into(), "-".into(), arch, CellJob::Real));
        }
    }
    for (name, syn) in sources {
        for strategy in &config.strategies {
            for arch in &config.archs {
                jobs.push((
                    name.clone(),
                    strategy.label(),
                    arch,
                    CellJob::Distilled { syn, strategy },
                ));
            }
        }
    }

    let cells: Vec<CrossEvalCell> = jobs
        .into_iter()
        .enumerate()
        .map(|(ci, (source, strategy_label, arch, job))| {
            let restarts = match job {
                CellJob::Real => config.real_restarts,
                CellJob::Distilled { .. } => config.distilled_restarts,
            };
            let fingerprint = format!("{source}/{strategy_label}/{arch}");
            let outcome =
                run_cell(&job, arch, train, test, config, ci as u64, restarts, &fingerprint);
            match outcome {
                Ok(report) => CrossEvalCell {
                    source,
                    strategy: strategy_label,
                    arch: arch.clone(),
                    restarts,
                    report: Some(report),
                    error: None,
                },
                Err(e) => CrossEvalCell {
                    source,
                    strategy: strategy_label,
                    arch: arch.clone(),
                    restarts,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(CrossEvalMatrix { cells })
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    job: &CellJob,
    arch: &ArchSpec,
    train: Option<&Dataset>,
    test: &Dataset,
    config: &CrossEvalConfig,
    cell_index: u64,
    restarts: usize,
    fingerprint: &str,
) -> Result<EvalReport> {
    // Expand the schedule once per cell; every restart shares it.
    let sched = match job {
        CellJob::Real => None,
        CellJob::Distilled { syn, strategy } => Some(strategy.expand(syn)?),
    };
    let results: Vec<Result<RestartResult>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let restart_seed = seed::derive(config.seed, "cell-restart", &[cell_index, r as u64]);
            let model: TrainedModel = match job {
                CellJob::Real => train_on_real(
                    arch,
                    train.expect("real cell requires a training set"),
                    test,
                    config.real_epochs,
                    config.real_lr,
                    config.real_batch,
                    restart_seed,
                )?,
                CellJob::Distilled { syn, .. } => train_on_distilled(
                    arch,
                    syn,
                    sched.as_ref().expect("distilled cell has a schedule"),
                    test,
                    restart_seed,
                )?,
            };
            Ok(RestartResult {
                seed: restart_seed,
                final_accuracy: model.final_accuracy().unwrap_or(0.0),
                final_logloss: model.final_logloss().unwrap_or(f64::INFINITY),
                accuracy_curve: model.accuracy_curve,
                logloss_curve: model.logloss_curve,
            })
        })
        .collect();
    let mut per_restart = Vec::with_capacity(restarts);
    for r in results {
        per_restart.push(r?);
    }
    EvalReport::aggregate(
        per_restart,
        fingerprint.to_string(),
        config.bootstrap_resamples,
        seed::derive(config.seed, "cell-bootstrap", &[cell_index]),
    )
}

/// Flat CSV mirroring the comparison-table layout; failed cells keep their
/// key columns and leave the statistics empty.
pub fn write_matrix_csv(matrix: &CrossEvalMatrix, path: &Path) -> Result<()> {
    let mut out = String::from("data_source,strategy,arch,mean,std,ci_lo,ci_hi,restarts\n");
    for cell in &matrix.cells {
        match &cell.report {
            Some(r) => out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{}\n",
                cell.source,
                cell.strategy,
                cell.arch,
                r.mean,
                r.std,
                r.ci95.0,
                r.ci95.1,
                cell.restarts
            )),
            None => out.push_str(&format!(
                "{},{},{},,,,,{}\n",
                cell.source, cell.strategy, cell.arch, cell.restarts
            )),
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_matrix_json(matrix: &CrossEvalMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(matrix)? + "\n")?;
    Ok(())
}

/// Per-restart convergence curves, one row per (restart, epoch).
pub fn write_curves_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out = String::from("restart_seed,epoch,accuracy,logloss\n");
    for r in &report.per_restart {
        for (e, (acc, ll)) in r.accuracy_curve.iter().zip(&r.logloss_curve).enumerate() {
            out.push_str(&format!("{},{e},{acc:.6},{ll:.6}\n", r.seed));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
