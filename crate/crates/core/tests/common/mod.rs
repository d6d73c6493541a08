//! Finite-difference oracles shared by the derivative test suites.
//!
//! Every analytic derivative in the library is judged against central
//! differences built only from `loss` (for first-order claims) or `grad`
//! (for second-order claims), so the oracle never shares a code path with
//! the implementation under test.
//!
//! Relu needs one extra precaution: central differences are only valid while
//! no hidden pre-activation crosses zero between the two evaluation points.
//! [`hidden_margin`] measures the smallest |z| over all hidden units so
//! callers can reject instances that sit too close to a kink for the chosen
//! step size.

#![allow(dead_code)] // each integration-test binary uses a different subset

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tabdistill::linalg::Matrix;
use tabdistill::net::{forward_cached, grad, loss, ArchSpec, LabeledBatch, ParamVector};

/// Relative L2 distance between two vectors, floored so that a pair of
/// near-zero vectors compares as equal instead of as 0/0.
pub fn norm_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "oracle length mismatch");
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Per-coordinate relative error with an absolute floor: coordinates smaller
/// than `floor` are compared absolutely at scale `floor`, which keeps
/// finite-difference noise on genuinely tiny coordinates from dominating.
pub fn coord_rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Standard-normal feature batch with balanced labels (first half class 0).
pub fn random_batch(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> LabeledBatch {
    assert!(len >= 2 && len.is_multiple_of(2), "test batches are balanced");
    let mut features = Matrix::zeros(len, dim);
    for v in features.data_mut() {
        *v = rng.sample::<f64, _>(rand_distr::StandardNormal);
    }
    let labels = (0..len).map(|r| usize::from(r >= len / 2)).collect();
    LabeledBatch::new(features, labels).unwrap()
}

/// Unit-norm random parameter direction.
pub fn random_direction(arch: &ArchSpec, rng: &mut ChaCha8Rng) -> ParamVector {
    let mut v = ParamVector::zeros(arch);
    for x in v.values_mut() {
        *x = rng.sample::<f64, _>(rand_distr::StandardNormal);
    }
    let n = v.norm();
    v.scale(1.0 / n);
    v
}

/// Smallest |pre-activation| over every hidden unit and example, i.e. the
/// distance to the nearest relu kink. Infinite when there are no hidden
/// layers (the output layer has no activation).
pub fn hidden_margin(arch: &ArchSpec, theta: &ParamVector, features: &Matrix) -> f64 {
    let cache = forward_cached(arch, theta, features).unwrap();
    let hidden = cache.zs.len() - 1;
    cache.zs[..hidden]
        .iter()
        .flat_map(|z| z.data().iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min)
}

/// Central finite difference of the loss in every parameter coordinate.
pub fn fd_loss_grad(arch: &ArchSpec, theta: &ParamVector, batch: &LabeledBatch, eps: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let mut plus = theta.clone();
            plus.values_mut()[i] += eps;
            let mut minus = theta.clone();
            minus.values_mut()[i] -= eps;
            let lp = loss(arch, &plus, batch).unwrap();
            let lm = loss(arch, &minus, batch).unwrap();
            (lp - lm) / (2.0 * eps)
        })
        .collect()
}

/// Central finite difference of the gradient along `v`: the Hessian-vector
/// product oracle.
pub fn fd_hvp(
    arch: &ArchSpec,
    theta: &ParamVector,
    batch: &LabeledBatch,
    v: &ParamVector,
    eps: f64,
) -> Vec<f64> {
    let mut plus = theta.clone();
    plus.add_scaled(v, eps);
    let mut minus = theta.clone();
    minus.add_scaled(v, -eps);
    let gp = grad(arch, &plus, batch).unwrap();
    let gm = grad(arch, &minus, batch).unwrap();
    gp.values()
        .iter()
        .zip(gm.values())
        .map(|(p, m)| (p - m) / (2.0 * eps))
        .collect()
}

/// Central finite difference of `⟨v, ∇_θ l⟩` in every feature coordinate:
/// the mixed-product oracle.
pub fn fd_mixed(
    arch: &ArchSpec,
    theta: &ParamVector,
    batch: &LabeledBatch,
    v: &ParamVector,
    eps: f64,
) -> Matrix {
    let rows = batch.len();
    let cols = batch.feature_dim();
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let base = batch.features().get(r, c);
            let mut plus = batch.clone();
            plus.features_mut().set(r, c, base + eps);
            let mut minus = batch.clone();
            minus.features_mut().set(r, c, base - eps);
            let dp = v.dot(&grad(arch, theta, &plus).unwrap());
            let dm = v.dot(&grad(arch, theta, &minus).unwrap());
            out.set(r, c, (dp - dm) / (2.0 * eps));
        }
    }
    out
}
