//! Finite-difference oracles for the acceptance suite.
//!
//! Everything here is built from `loss` and `grad` alone, so no oracle
//! shares a code path with the reverse-mode machinery it judges. Relu
//! instances are drawn from seeded candidate streams and rejected while any
//! hidden pre-activation sits within a margin of a kink, where central
//! differences would straddle two linear pieces.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tabdistill::distill::{
    backward_pass, inner_unroll, DistillConfig, DistillMetadata, HypergradAccumulator,
    SyntheticData, FORMAT_VERSION,
};
use tabdistill::linalg::Matrix;
use tabdistill::net::{
    forward_cached, grad, loss, xavier_init, Activation, ArchSpec, LabeledBatch, ParamVector,
};
use tabdistill::seed;

/// Relative L2 distance between two vectors, floored so near-zero pairs
/// compare as equal instead of as 0/0.
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
/// finite-difference cancellation noise (~1e-10) on genuinely tiny
/// coordinates from dominating the comparison.
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
/// distance to the nearest relu kink. Infinite without hidden layers.
pub fn hidden_margin(arch: &ArchSpec, theta: &ParamVector, features: &Matrix) -> f64 {
    let cache = forward_cached(arch, theta, features).unwrap();
    let hidden = cache.zs.len() - 1;
    cache.zs[..hidden]
        .iter()
        .flat_map(|z| z.data().iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min)
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

/// Draws `(theta, batch, v)` instances for the second-order checks, skipping
/// any whose hidden pre-activations sit within `margin` of a relu kink.
pub fn kink_safe_instances(
    arch: &ArchSpec,
    base_seed: u64,
    count: usize,
    margin: f64,
) -> Vec<(ParamVector, LabeledBatch, ParamVector)> {
    let mut out = Vec::with_capacity(count);
    let mut attempt = 0u64;
    while out.len() < count {
        assert!(attempt < 100_000, "margin {margin} unreachable for {arch}");
        let mut rng = seed::rng(seed::derive(base_seed, "fd-instance", &[attempt]));
        attempt += 1;
        let theta = xavier_init(arch, seed::derive(base_seed, "fd-theta", &[attempt]));
        let batch = random_batch(&mut rng, 6, arch.input_width());
        if arch.activation() == Activation::Relu
            && hidden_margin(arch, &theta, batch.features()) < margin
        {
            continue;
        }
        let v = random_direction(arch, &mut rng);
        out.push((theta, batch, v));
    }
    out
}

/// One randomized small unroll: synthetic data, per-model architectures and
/// initializations, and a real scoring batch.
pub struct Instance {
    pub archs: Vec<ArchSpec>,
    pub theta0s: Vec<ParamVector>,
    pub batches: Vec<LabeledBatch>,
    pub lrs: Vec<f64>,
    pub inner_epochs: usize,
    pub real: LabeledBatch,
}

impl Instance {
    pub fn syn(&self) -> SyntheticData {
        build_syn(&self.batches, &self.lrs, self.inner_epochs, &self.archs)
    }

    /// Same instance with feature `(batch, row, col)` shifted by `delta`.
    fn syn_with_feature(&self, batch: usize, row: usize, col: usize, delta: f64) -> SyntheticData {
        let mut batches = self.batches.clone();
        let base = batches[batch].features().get(row, col);
        batches[batch].features_mut().set(row, col, base + delta);
        build_syn(&batches, &self.lrs, self.inner_epochs, &self.archs)
    }

    /// Same instance with step size `k` shifted by `delta`.
    fn syn_with_lr(&self, k: usize, delta: f64) -> SyntheticData {
        let mut lrs = self.lrs.clone();
        lrs[k] += delta;
        build_syn(&self.batches, &lrs, self.inner_epochs, &self.archs)
    }
}

fn build_syn(
    batches: &[LabeledBatch],
    lrs: &[f64],
    inner_epochs: usize,
    archs: &[ArchSpec],
) -> SyntheticData {
    let mut config = DistillConfig::multi_arch(archs.to_vec(), 0);
    config.steps_per_epoch = batches.len();
    config.inner_epochs = inner_epochs;
    config.synthetic_batch_size = batches[0].len();
    let metadata = DistillMetadata {
        format_version: FORMAT_VERSION,
        config,
        synthetic_init_seed: 0,
        counters: Default::default(),
        outer_loss_per_epoch: Vec::new(),
        replays: Vec::new(),
    };
    SyntheticData::new(batches.to_vec(), lrs.to_vec(), inner_epochs, metadata).unwrap()
}

/// Forward-only reference unroll: every snapshot of one model's training.
fn manual_unroll(arch: &ArchSpec, theta0: &ParamVector, syn: &SyntheticData) -> Vec<ParamVector> {
    let mut snapshots = vec![theta0.clone()];
    for k in 0..syn.unroll_len() {
        let g = grad(arch, snapshots.last().unwrap(), syn.batch(syn.batch_index(k))).unwrap();
        let mut next = snapshots.last().unwrap().clone();
        next.add_scaled(&g, -syn.lrs()[k]);
        snapshots.push(next);
    }
    snapshots
}

/// The outer objective: real-batch loss of the unrolled models, averaged.
fn outer_loss(inst: &Instance, syn: &SyntheticData) -> f64 {
    let mut total = 0.0;
    for (arch, theta0) in inst.archs.iter().zip(&inst.theta0s) {
        let snapshots = manual_unroll(arch, theta0, syn);
        total += loss(arch, snapshots.last().unwrap(), &inst.real).unwrap();
    }
    total / inst.archs.len() as f64
}

/// Analytic hypergradients through the reverse pass under test.
fn analytic(inst: &Instance, syn: &SyntheticData) -> HypergradAccumulator {
    let mut acc = HypergradAccumulator::zeros_like(syn);
    for (arch, theta0) in inst.archs.iter().zip(&inst.theta0s) {
        let traj = inner_unroll(arch, theta0.clone(), syn).unwrap();
        backward_pass(arch, &traj, syn, &inst.real, inst.archs.len(), &mut acc).unwrap();
    }
    acc
}

/// Smallest relu margin along every model's trajectory, including the real
/// batch at the endpoint. Tanh models never reject.
fn instance_margin(inst: &Instance, syn: &SyntheticData) -> f64 {
    let mut margin = f64::INFINITY;
    for (arch, theta0) in inst.archs.iter().zip(&inst.theta0s) {
        if arch.activation() != Activation::Relu {
            continue;
        }
        let snapshots = manual_unroll(arch, theta0, syn);
        for (k, snap) in snapshots[..syn.unroll_len()].iter().enumerate() {
            let b = syn.batch(syn.batch_index(k));
            margin = margin.min(hidden_margin(arch, snap, b.features()));
        }
        margin = margin.min(hidden_margin(
            arch,
            snapshots.last().unwrap(),
            inst.real.features(),
        ));
    }
    margin
}

/// Draws an instance from the seeded stream, rejecting relu trajectories
/// that pass within `margin` of a kink. Synthetic batches hold 4 objects,
/// the real scoring batch 12.
pub fn sample_instance(
    archs: Vec<ArchSpec>,
    s: usize,
    inner_epochs: usize,
    base_seed: u64,
    margin: f64,
) -> Instance {
    for attempt in 0..2_000u64 {
        let mut rng = seed::rng(seed::derive(base_seed, "hyper-instance", &[attempt]));
        let batches: Vec<LabeledBatch> = (0..s).map(|_| random_batch(&mut rng, 4, 2)).collect();
        let lrs: Vec<f64> = (0..inner_epochs * s)
            .map(|_| rng.gen_range(0.005..0.05))
            .collect();
        let theta0s: Vec<ParamVector> = (0..archs.len())
            .map(|j| {
                xavier_init(
                    &archs[j],
                    seed::derive(base_seed, "hyper-theta", &[attempt, j as u64]),
                )
            })
            .collect();
        let real = random_batch(&mut rng, 12, 2);
        let inst = Instance {
            archs: archs.clone(),
            theta0s,
            batches,
            lrs,
            inner_epochs,
            real,
        };
        let syn = inst.syn();
        if instance_margin(&inst, &syn) > margin {
            return inst;
        }
    }
    panic!("no kink-free instance found for margin {margin}");
}

/// Checks every hypergradient coordinate of `inst` against central
/// differences of the reference outer loss. Returns the number of
/// coordinates checked and the worst relative error, or a description of
/// the first violation. `tol` is relative above `floor` (see
/// [`coord_rel_err`]).
pub fn check_instance(
    inst: &Instance,
    eps: f64,
    tol: f64,
    floor: f64,
    label: &str,
) -> Result<(usize, f64), String> {
    let syn = inst.syn();
    let acc = analytic(inst, &syn);
    let mut coords = 0usize;
    let mut worst = 0.0f64;

    for k in 0..syn.unroll_len() {
        let lp = outer_loss(inst, &inst.syn_with_lr(k, eps));
        let lm = outer_loss(inst, &inst.syn_with_lr(k, -eps));
        let fd = (lp - lm) / (2.0 * eps);
        let got = acc.grad_lr()[k];
        let err = coord_rel_err(got, fd, floor);
        coords += 1;
        worst = worst.max(err);
        if err >= tol {
            return Err(format!(
                "{label}: dL/dlr[{k}] analytic {got:.6e} vs finite difference {fd:.6e} \
                 (relative error {err:.2e} >= {tol:.0e})"
            ));
        }
    }

    for (i, batch) in inst.batches.iter().enumerate() {
        for r in 0..batch.len() {
            for c in 0..batch.feature_dim() {
                let lp = outer_loss(inst, &inst.syn_with_feature(i, r, c, eps));
                let lm = outer_loss(inst, &inst.syn_with_feature(i, r, c, -eps));
                let fd = (lp - lm) / (2.0 * eps);
                let got = acc.grad_x()[i].get(r, c);
                let err = coord_rel_err(got, fd, floor);
                coords += 1;
                worst = worst.max(err);
                if err >= tol {
                    return Err(format!(
                        "{label}: dL/dx[{i}][{r},{c}] analytic {got:.6e} vs finite difference \
                         {fd:.6e} (relative error {err:.2e} >= {tol:.0e})"
                    ));
                }
            }
        }
    }
    Ok((coords, worst))
}
