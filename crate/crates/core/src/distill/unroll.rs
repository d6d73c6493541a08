//! The inner training unroll and the reverse hypergradient recursion.
//!
//! Forward: starting from `θ_0`, apply `n` plain gradient-descent steps
//! `θ_{k+1} = θ_k − η̃_k ∇_θ l(x̃_{i(k)}, θ_k)` with `i(k) = k mod s`,
//! keeping every snapshot and every inner gradient.
//!
//! Backward: let `L` be the real-batch loss at `θ_n` and `p_k = dL/dθ_k`.
//! Differentiating the update rule gives
//!
//! ```text
//! p_n        = (1/m) ∇_θ l(real, θ_n)
//! dL/dη̃_k   = −⟨p_{k+1}, ∇_θ l(x̃_{i(k)}, θ_k)⟩
//! dL/dx̃_i  += −η̃_k · ∇_x̃ ⟨p_{k+1}, ∇_θ l(x̃_i, θ_k)⟩     for i = i(k)
//! p_k        = p_{k+1} − η̃_k · (∂²l/∂θ² at θ_k, x̃_{i(k)}) p_{k+1}
//! ```
//!
//! The minus signs on the two accumulation lines come from the minus in the
//! descent update (`∂θ_{k+1}/∂η̃_k = −∇_θ l`); dropping them flips every
//! hypergradient and breaks the finite-difference oracles. Each backward
//! step needs one gradient-plus-tangent evaluation, so the whole pass costs
//! a small constant times the forward unroll.

use super::{HypergradAccumulator, SyntheticData};
use crate::error::{Error, Result};
use crate::net::{grad, grad_and_products, loss_and_grad, ArchSpec, LabeledBatch, ParamVector};

/// The stored forward unroll: snapshots `θ_0..θ_n` plus, per step, the
/// inner gradient it applied and the synthetic batch it used.
#[derive(Debug, Clone)]
pub struct Trajectory {
    snapshots: Vec<ParamVector>,
    step_grads: Vec<ParamVector>,
    batch_indices: Vec<usize>,
}

impl Trajectory {
    /// Number of update steps `n`.
    pub fn len(&self) -> usize {
        self.step_grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.step_grads.is_empty()
    }

    pub fn theta(&self, k: usize) -> &ParamVector {
        &self.snapshots[k]
    }

    pub fn final_theta(&self) -> &ParamVector {
        self.snapshots.last().expect("trajectory holds θ_0")
    }

    pub fn snapshots(&self) -> &[ParamVector] {
        &self.snapshots
    }

    pub fn step_grad(&self, k: usize) -> &ParamVector {
        &self.step_grads[k]
    }

    pub fn batch_index(&self, k: usize) -> usize {
        self.batch_indices[k]
    }

    /// Snapshots recorded beyond the caller-supplied `θ_0`; this is the
    /// peak per-model storage the engine reports.
    pub fn stored_snapshots(&self) -> usize {
        self.snapshots.len() - 1
    }
}

/// Runs the inner unroll, recording the full trajectory.
pub fn inner_unroll(
    arch: &ArchSpec,
    theta0: ParamVector,
    syn: &SyntheticData,
) -> Result<Trajectory> {
    if theta0.len() != crate::net::ParamLayout::of(arch).total_len() {
        return Err(Error::Shape(format!(
            "θ_0 has {} values, architecture {arch} needs {}",
            theta0.len(),
            crate::net::ParamLayout::of(arch).total_len()
        )));
    }
    let n = syn.unroll_len();
    let mut snapshots = Vec::with_capacity(n + 1);
    let mut step_grads = Vec::with_capacity(n);
    let mut batch_indices = Vec::with_capacity(n);
    snapshots.push(theta0);
    for k in 0..n {
        let i = syn.batch_index(k);
        let g = grad(arch, &snapshots[k], syn.batch(i))?;
        let mut next = snapshots[k].clone();
        next.add_scaled(&g, -syn.lrs()[k]);
        if !next.is_finite() {
            return Err(Error::NonFinite(format!(
                "parameters diverged at inner step {k}"
            )));
        }
        snapshots.push(next);
        step_grads.push(g);
        batch_indices.push(i);
    }
    Ok(Trajectory {
        snapshots,
        step_grads,
        batch_indices,
    })
}

/// Backpropagates the real-batch loss at `θ_n` through the stored unroll,
/// adding this model's contributions (already weighted by `1/m`) into the
/// accumulator. Returns the unweighted real-batch loss at `θ_n`.
pub fn backward_pass(
    arch: &ArchSpec,
    traj: &Trajectory,
    syn: &SyntheticData,
    real_batch: &LabeledBatch,
    inner_models: usize,
    acc: &mut HypergradAccumulator,
) -> Result<f64> {
    if traj.len() != syn.unroll_len() {
        return Err(Error::Shape(format!(
            "trajectory has {} steps but synthetic data defines {}",
            traj.len(),
            syn.unroll_len()
        )));
    }
    if !acc.matches(syn) {
        return Err(Error::Shape(
            "hypergradient accumulator does not match synthetic data shapes".into(),
        ));
    }
    if inner_models == 0 {
        return Err(Error::InvalidConfig("inner_models must be >= 1".into()));
    }
    let (outer_loss, mut p) = loss_and_grad(arch, traj.final_theta(), real_batch)?;
    p.scale(1.0 / inner_models as f64);
    for k in (0..traj.len()).rev() {
        let i = traj.batch_index(k);
        let lr = syn.lrs()[k];
        let so = grad_and_products(arch, traj.theta(k), syn.batch(i), &p)?;
        acc.add_to_grad_lr(k, -p.dot(&so.grad));
        acc.add_to_grad_x(i, -lr, &so.mixed);
        p.add_scaled(&so.hvp, -lr);
        if !p.is_finite() {
            return Err(Error::NonFinite(format!(
                "adjoint diverged at inner step {k}"
            )));
        }
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite("hypergradients are not finite".into()));
    }
    Ok(outer_loss)
}
