//! Evaluation harness: train models on real or distilled data, aggregate
//! restart statistics with bootstrap confidence intervals, and build
//! cross-architecture comparison matrices.

mod grid;
mod report;

pub use grid::{decision_grid, write_grid_csv, DecisionGrid};
pub use report::{
    cross_eval, write_curves_csv, write_matrix_csv, write_matrix_json, CrossEvalCell,
    CrossEvalConfig, CrossEvalMatrix, EvalReport, RestartResult,
};

use crate::data::Dataset;
use crate::distill::SyntheticData;
use crate::error::{Error, Result};
use crate::net::{accuracy, grad, loss, xavier_init, ArchSpec, LabeledBatch, ParamVector};
use crate::schedule::TrainingSchedule;
use crate::seed;
use rand::seq::SliceRandom;

/// A trained parameter vector plus its per-epoch test metrics.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub theta: ParamVector,
    pub accuracy_curve: Vec<f64>,
    pub logloss_curve: Vec<f64>,
}

impl TrainedModel {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.accuracy_curve.last().copied()
    }

    pub fn final_logloss(&self) -> Option<f64> {
        self.logloss_curve.last().copied()
    }
}

/// Plain minibatch gradient descent on a (standardized) real training set,
/// constant learning rate, fresh shuffle per epoch. Test metrics are
/// recorded at the end of every epoch.
pub fn train_on_real(
    arch: &ArchSpec,
    train: &Dataset,
    test: &Dataset,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed_value: u64,
) -> Result<TrainedModel> {
    if lr.is_nan() || lr < 0.0 {
        return Err(Error::InvalidConfig(format!("lr must be >= 0, got {lr}")));
    }
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    if train.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    let test_batch = test.to_batch();
    let mut theta = xavier_init(arch, seed_value);
    let mut accuracy_curve = Vec::with_capacity(epochs);
    let mut logloss_curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive(
            seed_value,
            "epoch-shuffle",
            &[epoch as u64],
        )));
        for chunk in order.chunks(batch_size) {
            let g = grad(arch, &theta, &train.batch_of(chunk))?;
            theta.add_scaled(&g, -lr);
            if !theta.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training diverged in epoch {epoch}"
                )));
            }
        }
        let (acc, ll) = test_metrics(arch, &theta, &test_batch)
            .map_err(|e| Error::NonFinite(format!("test metrics in epoch {epoch}: {e}")))?;
        accuracy_curve.push(acc);
        logloss_curve.push(ll);
    }
    Ok(TrainedModel {
        theta,
        accuracy_curve,
        logloss_curve,
    })
}

/// Trains a freshly initialized model on distilled data by following a
/// schedule step for step: `θ ← θ − lr·∇_θ l(x̃_i, θ)`. Test metrics are
/// recorded once per schedule epoch.
pub fn train_on_distilled(
    arch: &ArchSpec,
    syn: &SyntheticData,
    sched: &TrainingSchedule,
    test: &Dataset,
    seed_value: u64,
) -> Result<TrainedModel> {
    if sched.steps_per_epoch() != syn.steps_per_epoch() {
        return Err(Error::Shape(format!(
            "schedule has {} steps per epoch but the synthetic data has {}",
            sched.steps_per_epoch(),
            syn.steps_per_epoch()
        )));
    }
    let test_batch = test.to_batch();
    let mut theta = xavier_init(arch, seed_value);
    let s = sched.steps_per_epoch();
    let mut accuracy_curve = Vec::with_capacity(sched.epochs());
    let mut logloss_curve = Vec::with_capacity(sched.epochs());
    for (g, entry) in sched.entries().iter().enumerate() {
        let gradient = grad(arch, &theta, syn.batch(entry.batch_index))?;
        theta.add_scaled(&gradient, -entry.lr);
        if !theta.is_finite() {
            return Err(Error::NonFinite(format!(
                "distilled training diverged at global step {g}"
            )));
        }
        if (g + 1) % s == 0 {
            let (acc, ll) = test_metrics(arch, &theta, &test_batch).map_err(|e| {
                Error::NonFinite(format!("test metrics after step {g}: {e}"))
            })?;
            accuracy_curve.push(acc);
            logloss_curve.push(ll);
        }
    }
    Ok(TrainedModel {
        theta,
        accuracy_curve,
        logloss_curve,
    })
}

fn test_metrics(arch: &ArchSpec, theta: &ParamVector, test: &LabeledBatch) -> Result<(f64, f64)> {
    Ok((accuracy(arch, theta, test)?, loss(arch, theta, test)?))
}

/// Percentile bootstrap interval for the mean: resample with replacement,
/// record each resample's mean, report the `(1−level)/2` and
/// `1−(1−level)/2` empirical quantiles (nearest-rank on the sorted means).
pub fn bootstrap_ci(
    samples: &[f64],
    level: f64,
    resamples: usize,
    seed_value: u64,
) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "bootstrap needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "level must be in (0, 1), got {level}"
        )));
    }
    if resamples < 1000 {
        return Err(Error::InvalidConfig(format!(
            "resamples must be >= 1000, got {resamples}"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("bootstrap sample is not finite".into()));
    }
    let mut rng = seed::rng(seed_value);
    let n = samples.len();
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += samples[rand::Rng::gen_range(&mut rng, 0..n)];
        }
        means.push(sum / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).expect("finite means"));
    let quantile = |q: f64| -> f64 {
        let idx = (q * (resamples - 1) as f64).round() as usize;
        means[idx.min(resamples - 1)]
    };
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(alpha), quantile(1.0 - alpha)))
}

/// Index of the restart with the median final test accuracy.
///
/// Even restart counts take the lower median; among exactly-equal
/// accuracies the smallest seed wins.
pub fn median_model(report: &EvalReport) -> Result<usize> {
    if report.per_restart.is_empty() {
        return Err(Error::InvalidConfig("report has no restarts".into()));
    }
    let mut accs: Vec<f64> = report.per_restart.iter().map(|r| r.final_accuracy).collect();
    accs.sort_by(|a, b| a.partial_cmp(b).expect("finite accuracies"));
    let median = accs[(accs.len() - 1) / 2];
    report
        .per_restart
        .iter()
        .enumerate()
        .filter(|(_, r)| r.final_accuracy == median)
        .min_by_key(|(_, r)| r.seed)
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidConfig("median accuracy not found".into()))
}
