//! Adaptive-moment outer updates for the synthetic features and step sizes.
//!
//! Both are treated as one flat parameter vector (features first, then
//! learning rates, the ordering of [`SyntheticData::flat_params`]). After
//! each update every learning rate is clamped to `[1e-6, ∞)` so the
//! positivity invariant survives arbitrarily aggressive gradients; the
//! hypergradient formulas themselves are used unmodified.

use super::{DistillConfig, HypergradAccumulator, SyntheticData};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const LR_FLOOR: f64 = 1e-6;

/// First/second moment estimates plus the bias-correction step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    step: u64,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            step: 0,
            m1: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn for_synthetic(syn: &SyntheticData) -> Self {
        Self::new(syn.outer_param_len())
    }

    /// Completed outer updates.
    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Applies one outer update to `syn` in place.
pub fn outer_step(
    config: &DistillConfig,
    syn: &mut SyntheticData,
    acc: &HypergradAccumulator,
    state: &mut AdamState,
) -> Result<()> {
    if !acc.matches(syn) {
        return Err(Error::Shape(
            "accumulator does not match synthetic data shapes".into(),
        ));
    }
    let grads = acc.flat_grads();
    if state.m1.len() != grads.len() {
        return Err(Error::Shape(format!(
            "optimizer state has {} slots but the flat gradient has {}",
            state.m1.len(),
            grads.len()
        )));
    }
    let mut params = syn.flat_params();
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for i in 0..grads.len() {
        let g = grads[i];
        state.m1[i] = config.beta1 * state.m1[i] + (1.0 - config.beta1) * g;
        state.m2[i] = config.beta2 * state.m2[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m1[i] / bc1;
        let v_hat = state.m2[i] / bc2;
        params[i] -= config.outer_lr * m_hat / (v_hat.sqrt() + config.epsilon);
        if !params[i].is_finite() {
            return Err(Error::NonFinite(format!(
                "outer update produced a non-finite value at flat index {i}"
            )));
        }
    }
    // The learning-rate block is the tail of the flat vector.
    let lr_start = params.len() - syn.unroll_len();
    for lr in &mut params[lr_start..] {
        if *lr < LR_FLOOR {
            *lr = LR_FLOOR;
        }
    }
    syn.set_flat_params(&params);
    Ok(())
}
