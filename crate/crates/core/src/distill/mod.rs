//! Distillation of a training set into synthetic objects and per-step
//! learning rates.
//!
//! The inner loop trains a freshly initialized model on the synthetic data
//! for `n = inner_epochs × steps_per_epoch` plain gradient-descent steps,
//! step `k` using synthetic batch `k mod s` and learned step size `η̃_k`.
//! The outer loop scores the trained model on a real minibatch and
//! backpropagates that loss through the whole unrolled trajectory, yielding
//! exact gradients with respect to every synthetic feature and every step
//! size. An adaptive-moment update then improves both.
//!
//! Module layout: [`unroll`] holds the forward trajectory and the reverse
//! hypergradient recursion, [`adam`] the outer optimizer, [`engine`] the
//! full outer loop, and [`io`] the on-disk formats.

mod adam;
mod engine;
mod io;
mod unroll;

pub use adam::{outer_step, AdamState};
pub use engine::{distill, init_synthetic};
pub use io::{read_json, write_csv, write_json, write_loss_log, FORMAT_VERSION};
pub use unroll::{backward_pass, inner_unroll, Trajectory};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::net::{ArchSpec, LabeledBatch};
use serde::{Deserialize, Serialize};

/// Everything the outer loop needs to know, including all ledger defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    /// One entry per inner model; all equal for single-architecture mode.
    pub architectures: Vec<ArchSpec>,
    /// Synthetic batches per inner epoch (`s`).
    pub steps_per_epoch: usize,
    /// Inner epochs; the unroll length is `inner_epochs × steps_per_epoch`.
    pub inner_epochs: usize,
    /// Outer epochs over the real training set (`T_e`).
    pub outer_epochs: usize,
    /// Real minibatch size for the outer loss.
    pub real_batch_size: usize,
    /// Synthetic objects per inner step (`b̃`, must be even: half per class).
    pub synthetic_batch_size: usize,
    /// Initial value for every synthetic learning rate.
    pub lr_init: f64,
    /// Outer optimizer step size.
    pub outer_lr: f64,
    /// Outer optimizer first-moment decay.
    pub beta1: f64,
    /// Outer optimizer second-moment decay.
    pub beta2: f64,
    /// Outer optimizer denominator fuzz.
    pub epsilon: f64,
    /// Root of every derived seed in the run.
    pub master_seed: u64,
}

impl DistillConfig {
    /// The reference configuration: `m` copies of one architecture,
    /// s=40, 5 inner epochs, 50 outer epochs at real batch 64, b̃=8.
    pub fn defaults(arch: ArchSpec, inner_models: usize, master_seed: u64) -> Self {
        Self::multi_arch(vec![arch; inner_models.max(1)], master_seed)
    }

    /// Same defaults with one explicit architecture per inner model.
    pub fn multi_arch(architectures: Vec<ArchSpec>, master_seed: u64) -> Self {
        Self {
            architectures,
            steps_per_epoch: 40,
            inner_epochs: 5,
            outer_epochs: 50,
            real_batch_size: 64,
            synthetic_batch_size: 8,
            lr_init: 0.01,
            outer_lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            master_seed,
        }
    }

    /// Number of inner models `m`.
    pub fn inner_models(&self) -> usize {
        self.architectures.len()
    }

    /// Unroll length `n`.
    pub fn unroll_len(&self) -> usize {
        self.inner_epochs * self.steps_per_epoch
    }

    pub fn validate(&self) -> Result<()> {
        if self.architectures.is_empty() {
            return Err(Error::InvalidConfig("need at least one inner model".into()));
        }
        let d = self.architectures[0].input_width();
        if self.architectures.iter().any(|a| a.input_width() != d) {
            return Err(Error::InvalidConfig(
                "all inner architectures must share the input width".into(),
            ));
        }
        if self.steps_per_epoch == 0 {
            return Err(Error::InvalidConfig("steps_per_epoch must be >= 1".into()));
        }
        if self.real_batch_size == 0 {
            return Err(Error::InvalidConfig("real_batch_size must be >= 1".into()));
        }
        if self.synthetic_batch_size == 0 || !self.synthetic_batch_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "synthetic_batch_size must be even and >= 2 (half per class), got {}",
                self.synthetic_batch_size
            )));
        }
        // NaN fails every comparison below, so it is rejected everywhere.
        if self.lr_init.is_nan() || self.lr_init <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lr_init must be > 0, got {}", self.lr_init
            )));
        }
        if self.outer_lr.is_nan() || self.outer_lr <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "outer_lr must be > 0, got {}", self.outer_lr
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0, 1), got {b}"
                )));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Work counters reported in distilled-dataset metadata.
///
/// `inner_forward_passes` counts one per inner gradient step, i.e. exactly
/// `m × T × inner_epochs × steps_per_epoch` for a full run. The replay
/// unrolls recorded after the outer loop finish are tallied separately so
/// the headline figure stays comparable across configurations.
/// `peak_snapshots_per_model` counts parameter snapshots recorded while
/// unrolling one model, excluding the caller-supplied initialization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub inner_forward_passes: u64,
    pub backward_tangent_passes: u64,
    pub peak_snapshots_per_model: usize,
    pub outer_steps: u64,
    pub replay_forward_passes: u64,
}

/// One post-run reference unroll: re-initializing from `theta0_seed` and
/// replaying the final synthetic data must land on `final_theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub arch: ArchSpec,
    pub theta0_seed: u64,
    pub final_theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillMetadata {
    pub format_version: u32,
    pub config: DistillConfig,
    pub synthetic_init_seed: u64,
    pub counters: Counters,
    /// Mean real-batch loss of the unrolled models, averaged per outer epoch.
    pub outer_loss_per_epoch: Vec<f64>,
    pub replays: Vec<ReplayRecord>,
}

/// The distillation product: `s` synthetic batches with fixed balanced
/// labels, plus one positive learning rate per inner step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    step_batches: Vec<LabeledBatch>,
    step_lrs: Vec<f64>,
    inner_epochs: usize,
    metadata: DistillMetadata,
}

impl SyntheticData {
    pub fn new(
        step_batches: Vec<LabeledBatch>,
        step_lrs: Vec<f64>,
        inner_epochs: usize,
        metadata: DistillMetadata,
    ) -> Result<Self> {
        let syn = Self {
            step_batches,
            step_lrs,
            inner_epochs,
            metadata,
        };
        syn.validate()?;
        Ok(syn)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.step_batches.len();
        if s == 0 {
            return Err(Error::InvalidConfig("need at least one synthetic batch".into()));
        }
        if self.step_lrs.len() != self.inner_epochs * s {
            return Err(Error::Shape(format!(
                "{} learning rates but {} epochs × {} steps",
                self.step_lrs.len(),
                self.inner_epochs,
                s
            )));
        }
        let b = self.step_batches[0].len();
        let d = self.step_batches[0].features().cols();
        for (i, batch) in self.step_batches.iter().enumerate() {
            if batch.len() != b || batch.features().cols() != d {
                return Err(Error::Shape(format!(
                    "synthetic batch {i} has shape {}×{}, expected {b}×{d}",
                    batch.len(),
                    batch.features().cols()
                )));
            }
            let ones = batch.labels().iter().filter(|&&l| l == 1).count();
            if 2 * ones != batch.len() {
                return Err(Error::InvalidConfig(format!(
                    "synthetic batch {i} labels are unbalanced ({ones} of {})",
                    batch.len()
                )));
            }
        }
        // NaN fails the comparison and is rejected along with lr <= 0.
        if let Some(k) = self.step_lrs.iter().position(|lr| lr.is_nan() || *lr <= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {k} is not positive: {}",
                self.step_lrs[k]
            )));
        }
        Ok(())
    }

    /// Synthetic batches per inner epoch (`s`).
    pub fn steps_per_epoch(&self) -> usize {
        self.step_batches.len()
    }

    pub fn inner_epochs(&self) -> usize {
        self.inner_epochs
    }

    /// Unroll length `n`.
    pub fn unroll_len(&self) -> usize {
        self.step_lrs.len()
    }

    /// Which synthetic batch inner step `k` trains on.
    pub fn batch_index(&self, k: usize) -> usize {
        k % self.step_batches.len()
    }

    pub fn batch(&self, index: usize) -> &LabeledBatch {
        &self.step_batches[index]
    }

    pub fn batches(&self) -> &[LabeledBatch] {
        &self.step_batches
    }

    pub fn lrs(&self) -> &[f64] {
        &self.step_lrs
    }

    /// Mutable access to the learning-rate program. Callers replacing the
    /// program wholesale should re-run [`SyntheticData::validate`]; the
    /// positivity invariant is theirs to keep.
    pub fn lrs_mut(&mut self) -> &mut [f64] {
        &mut self.step_lrs
    }

    pub fn objects_per_batch(&self) -> usize {
        self.step_batches[0].len()
    }

    pub fn feature_dim(&self) -> usize {
        self.step_batches[0].features().cols()
    }

    pub fn total_objects(&self) -> usize {
        self.steps_per_epoch() * self.objects_per_batch()
    }

    pub fn metadata(&self) -> &DistillMetadata {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut DistillMetadata {
        &mut self.metadata
    }

    /// All synthetic features and learning rates as one flat vector, batch
    /// features row-major in step order followed by the learning rates.
    /// This is the parameter ordering the outer optimizer state uses.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.outer_param_len());
        for batch in &self.step_batches {
            out.extend_from_slice(batch.features().data());
        }
        out.extend_from_slice(&self.step_lrs);
        out
    }

    pub(crate) fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.outer_param_len(), "flat parameter length");
        let mut at = 0;
        for batch in &mut self.step_batches {
            let data = batch.features_mut().data_mut();
            data.copy_from_slice(&flat[at..at + data.len()]);
            at += data.len();
        }
        self.step_lrs.copy_from_slice(&flat[at..]);
    }

    /// Total outer-optimized scalars: every feature plus every step size.
    pub fn outer_param_len(&self) -> usize {
        self.total_objects() * self.feature_dim() + self.step_lrs.len()
    }
}

/// Running sums of the outer-loss gradients with respect to the synthetic
/// features (`grad_x`, one matrix per synthetic batch) and the step sizes
/// (`grad_lr`, one scalar per inner step), accumulated over the inner
/// models of one outer step.
#[derive(Debug, Clone, PartialEq)]
pub struct HypergradAccumulator {
    grad_x: Vec<Matrix>,
    grad_lr: Vec<f64>,
}

impl HypergradAccumulator {
    pub fn zeros_like(syn: &SyntheticData) -> Self {
        Self {
            grad_x: syn
                .batches()
                .iter()
                .map(|b| Matrix::zeros(b.len(), b.features().cols()))
                .collect(),
            grad_lr: vec![0.0; syn.unroll_len()],
        }
    }

    pub fn reset(&mut self) {
        for g in &mut self.grad_x {
            g.fill(0.0);
        }
        self.grad_lr.fill(0.0);
    }

    pub fn grad_x(&self) -> &[Matrix] {
        &self.grad_x
    }

    pub fn grad_lr(&self) -> &[f64] {
        &self.grad_lr
    }

    pub(crate) fn add_to_grad_x(&mut self, batch_index: usize, scale: f64, delta: &Matrix) {
        self.grad_x[batch_index].add_scaled(delta, scale);
    }

    pub(crate) fn add_to_grad_lr(&mut self, k: usize, delta: f64) {
        self.grad_lr[k] += delta;
    }

    /// Adds another accumulator (same shapes) into this one; used to merge
    /// per-model contributions in a fixed order.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.grad_x.len(), other.grad_x.len(), "accumulator shapes");
        assert_eq!(self.grad_lr.len(), other.grad_lr.len(), "accumulator shapes");
        for (mine, theirs) in self.grad_x.iter_mut().zip(&other.grad_x) {
            mine.add_scaled(theirs, 1.0);
        }
        for (mine, theirs) in self.grad_lr.iter_mut().zip(&other.grad_lr) {
            *mine += *theirs;
        }
    }

    /// Gradients in the same flat ordering as [`SyntheticData::flat_params`].
    pub fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.grad_x {
            out.extend_from_slice(g.data());
        }
        out.extend_from_slice(&self.grad_lr);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.grad_x.iter().all(|g| g.is_finite())
            && self.grad_lr.iter().all(|v| v.is_finite())
    }

    pub fn matches(&self, syn: &SyntheticData) -> bool {
        self.grad_lr.len() == syn.unroll_len()
            && self.grad_x.len() == syn.steps_per_epoch()
            && self
                .grad_x
                .iter()
                .zip(syn.batches())
                .all(|(g, b)| g.rows() == b.len() && g.cols() == b.features().cols())
    }
}
