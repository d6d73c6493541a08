//! The outer optimization loop.
//!
//! Each outer step: sample a real minibatch, freshly initialize the `m`
//! inner models, unroll each on the current synthetic data, backpropagate
//! the real-batch loss through each unroll, merge the per-model
//! hypergradients in model order, and apply one adaptive-moment update.
//! Real batches are drawn without replacement within an outer epoch, with
//! a fresh shuffle per epoch, so `outer_epochs × ceil(N / batch)` is the
//! exact outer step count.
//!
//! The per-model work inside one outer step runs on the current rayon pool.
//! Results are merged in fixed model order, so the hypergradient sums —
//! and therefore the whole run — are bit-identical regardless of thread
//! count.
//!
//! After the loop, one extra reference unroll per inner model is recorded
//! (seed + final parameters) so downstream training can prove it replays
//! the distillation trajectory exactly. Those unrolls are tallied in a
//! separate counter to keep the headline forward-pass count at
//! `m × T × inner_epochs × steps_per_epoch`.

use super::unroll::{backward_pass, inner_unroll};
use super::{
    outer_step, AdamState, Counters, DistillConfig, DistillMetadata, HypergradAccumulator,
    ReplayRecord, SyntheticData,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::net::{xavier_init, LabeledBatch};
use crate::seed;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Seed-derivation tags used by the engine; fixed so runs are replayable.
const TAG_SYNTHETIC_INIT: &str = "synthetic-init";
const TAG_REAL_SHUFFLE: &str = "real-shuffle";
const TAG_THETA0: &str = "theta0";
const TAG_REPLAY: &str = "replay-theta0";

/// Builds the starting synthetic data: standard-normal features, fixed
/// balanced labels (first half class 0, second half class 1 per batch),
/// and every learning rate at `lr_init`.
pub fn init_synthetic(config: &DistillConfig, init_seed: u64) -> Result<SyntheticData> {
    config.validate()?;
    let s = config.steps_per_epoch;
    let b = config.synthetic_batch_size;
    let d = config.architectures[0].input_width();
    let mut rng = seed::rng(init_seed);
    let normal = StandardNormal;
    let mut batches = Vec::with_capacity(s);
    let labels: Vec<usize> = (0..b).map(|r| usize::from(r >= b / 2)).collect();
    for _ in 0..s {
        let mut features = Matrix::zeros(b, d);
        for v in features.data_mut() {
            *v = normal.sample(&mut rng);
        }
        batches.push(LabeledBatch::new(features, labels.clone())?);
    }
    let lrs = vec![config.lr_init; config.unroll_len()];
    SyntheticData::new(
        batches,
        lrs,
        config.inner_epochs,
        DistillMetadata {
            format_version: super::io::FORMAT_VERSION,
            config: config.clone(),
            synthetic_init_seed: init_seed,
            counters: Counters::default(),
            outer_loss_per_epoch: Vec::new(),
            replays: Vec::new(),
        },
    )
}

/// Runs the full outer loop and returns the distilled dataset with
/// counters, per-epoch loss log, and replay records in its metadata.
pub fn distill(config: &DistillConfig, train: &Dataset) -> Result<SyntheticData> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    let d = config.architectures[0].input_width();
    if train.feature_dim() != d {
        return Err(Error::Shape(format!(
            "training data has {} features but the architectures expect {d}",
            train.feature_dim()
        )));
    }
    let master = config.master_seed;
    let mut syn = init_synthetic(config, seed::derive(master, TAG_SYNTHETIC_INIT, &[]))?;
    let m = config.inner_models();
    let n = config.unroll_len();
    let mut adam = AdamState::for_synthetic(&syn);
    let mut acc = HypergradAccumulator::zeros_like(&syn);
    let mut counters = Counters::default();
    let mut loss_per_epoch = Vec::with_capacity(config.outer_epochs);

    let mut t: u64 = 0; // global outer step
    for epoch in 0..config.outer_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive(
            master,
            TAG_REAL_SHUFFLE,
            &[epoch as u64],
        )));
        let mut epoch_loss = 0.0;
        let mut epoch_steps = 0usize;
        for chunk in order.chunks(config.real_batch_size) {
            let real = train.batch_of(chunk);
            let per_model: Vec<Result<(HypergradAccumulator, f64)>> = config
                .architectures
                .par_iter()
                .enumerate()
                .map(|(j, arch)| {
                    let theta0 =
                        xavier_init(arch, seed::derive(master, TAG_THETA0, &[t, j as u64]));
                    let traj = inner_unroll(arch, theta0, &syn).map_err(|e| {
                        annotate(e, t, j, "inner unroll")
                    })?;
                    let mut model_acc = HypergradAccumulator::zeros_like(&syn);
                    let loss = backward_pass(arch, &traj, &syn, &real, m, &mut model_acc)
                        .map_err(|e| annotate(e, t, j, "backward pass"))?;
                    Ok((model_acc, loss))
                })
                .collect();

            acc.reset();
            let mut step_loss = 0.0;
            for result in per_model {
                let (model_acc, loss) = result?;
                acc.merge(&model_acc);
                step_loss += loss;
            }
            counters.inner_forward_passes += (m * n) as u64;
            counters.backward_tangent_passes += (m * n) as u64;
            counters.peak_snapshots_per_model = counters.peak_snapshots_per_model.max(n);
            counters.outer_steps += 1;

            outer_step(config, &mut syn, &acc, &mut adam)
                .map_err(|e| Error::NonFinite(format!("outer step {t}: {e}")))?;
            epoch_loss += step_loss / m as f64;
            epoch_steps += 1;
            t += 1;
        }
        loss_per_epoch.push(epoch_loss / epoch_steps.max(1) as f64);
    }

    // Reference unrolls against the *final* synthetic data, one per model.
    let mut replays = Vec::with_capacity(m);
    for (j, arch) in config.architectures.iter().enumerate() {
        let theta0_seed = seed::derive(master, TAG_REPLAY, &[j as u64]);
        let traj = inner_unroll(arch, xavier_init(arch, theta0_seed), &syn)
            .map_err(|e| Error::NonFinite(format!("replay unroll, model {j}: {e}")))?;
        counters.replay_forward_passes += n as u64;
        replays.push(ReplayRecord {
            arch: arch.clone(),
            theta0_seed,
            final_theta: traj.final_theta().values().to_vec(),
        });
    }

    let meta = syn.metadata_mut();
    meta.counters = counters;
    meta.outer_loss_per_epoch = loss_per_epoch;
    meta.replays = replays;
    Ok(syn)
}

fn annotate(e: Error, outer_step: u64, model: usize, stage: &str) -> Error {
    match e {
        Error::NonFinite(msg) => Error::NonFinite(format!(
            "outer step {outer_step}, model {model}, {stage}: {msg}"
        )),
        other => other,
    }
}
