//! Forward pass, classification loss, accuracy, and the exact loss gradient.
//!
//! The loss is mean softmax cross-entropy over the batch. The backward pass
//! keeps every intermediate (`z`, layer inputs, `dz`, `din`) because the
//! second-order kernels replay both passes in tangent form.

use super::arch::ArchSpec;
use super::batch::LabeledBatch;
use super::params::ParamVector;
use crate::error::{shape_err, Error, Result};
use crate::linalg::{self, Matrix};

/// Everything remembered from a forward pass.
///
/// `inputs[l]` is what layer `l` consumed (`inputs[0]` is the feature
/// matrix); `zs[l]` its pre-activation output. Logits are `zs[L-1]`.
pub struct ForwardCache {
    pub inputs: Vec<Matrix>,
    pub zs: Vec<Matrix>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Matrix {
        self.zs.last().expect("at least one layer")
    }
}

fn check_input(arch: &ArchSpec, theta: &ParamVector, features: &Matrix) -> Result<()> {
    if theta.len() != arch.param_len() {
        return Err(shape_err(format!(
            "parameter vector length {} does not match {arch}",
            theta.len()
        )));
    }
    if features.cols() != arch.input_width() {
        return Err(shape_err(format!(
            "feature width {} does not match architecture input width {}",
            features.cols(),
            arch.input_width()
        )));
    }
    Ok(())
}

fn layer_weight_matrix(theta: &ParamVector, l: usize) -> Matrix {
    let block = theta.layout().blocks()[l];
    Matrix::from_vec(block.in_dim, block.out_dim, theta.weights(l).to_vec())
        .expect("layout slice has matching length")
}

/// Affine layer: `z = input * W + 1⊗b`.
fn affine(input: &Matrix, w: &Matrix, b: &[f64]) -> Matrix {
    let mut z = linalg::mul(input, w);
    for r in 0..z.rows() {
        for (v, &bias) in z.row_mut(r).iter_mut().zip(b) {
            *v += bias;
        }
    }
    z
}

pub fn forward_cached(
    arch: &ArchSpec,
    theta: &ParamVector,
    features: &Matrix,
) -> Result<ForwardCache> {
    check_input(arch, theta, features)?;
    let num_layers = arch.num_layers();
    let act = arch.activation();
    let mut inputs = Vec::with_capacity(num_layers);
    let mut zs = Vec::with_capacity(num_layers);
    let mut current = features.clone();
    for l in 0..num_layers {
        let w = layer_weight_matrix(theta, l);
        let z = affine(&current, &w, theta.biases(l));
        let next = if l + 1 < num_layers {
            let mut a = Matrix::zeros(z.rows(), z.cols());
            for (av, &zv) in a.data_mut().iter_mut().zip(z.data()) {
                *av = act.apply(zv).0;
            }
            a
        } else {
            Matrix::zeros(0, 0) // logits are not fed anywhere
        };
        inputs.push(current);
        zs.push(z);
        current = next;
    }
    Ok(ForwardCache { inputs, zs })
}

/// Logits for a feature matrix. Pure function of its inputs.
pub fn forward(arch: &ArchSpec, theta: &ParamVector, features: &Matrix) -> Result<Matrix> {
    let mut cache = forward_cached(arch, theta, features)?;
    Ok(cache.zs.pop().expect("at least one layer"))
}

/// Row-wise softmax probabilities, computed with the max-shift trick.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut p = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (pv, &z) in p.row_mut(r).iter_mut().zip(row) {
            *pv = (z - max).exp();
            sum += *pv;
        }
        for pv in p.row_mut(r) {
            *pv /= sum;
        }
    }
    p
}

/// Mean cross-entropy of logits against labels.
pub fn loss_from_logits(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if logits.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    if logits.rows() != labels.len() {
        return Err(shape_err("logit rows do not match label count"));
    }
    let mut total = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    Ok(total / labels.len() as f64)
}

/// Mean softmax cross-entropy of the model on a batch.
pub fn loss(arch: &ArchSpec, theta: &ParamVector, batch: &LabeledBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let cache = forward_cached(arch, theta, batch.features())?;
    loss_from_logits(cache.logits(), batch.labels())
}

/// Fraction of rows whose argmax logit equals the label.
///
/// Ties go to the lower class index, so an all-zero model predicts class 0
/// everywhere.
pub fn accuracy(arch: &ArchSpec, theta: &ParamVector, batch: &LabeledBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let logits = forward(arch, theta, batch.features())?;
    let mut correct = 0usize;
    for (r, &y) in batch.labels().iter().enumerate() {
        if predict_row(logits.row(r)) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / batch.len() as f64)
}

/// Argmax with ties broken toward the lowest index.
pub fn predict_row(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Intermediates of one reverse pass, kept for the tangent (second-order)
/// replay.
///
/// `dzs[l]` is dL/dz of layer `l`; `dins[l]` is dL/d(input of layer `l`), so
/// `dins[0]` is the gradient with respect to the features.
pub struct Backprop {
    pub dzs: Vec<Matrix>,
    pub dins: Vec<Matrix>,
    pub grad: ParamVector,
}

impl Backprop {
    pub fn feature_grad(&self) -> &Matrix {
        &self.dins[0]
    }
}

/// Reverse pass through the cached forward computation.
pub fn backprop(
    arch: &ArchSpec,
    theta: &ParamVector,
    cache: &ForwardCache,
    labels: &[usize],
) -> Result<Backprop> {
    let num_layers = arch.num_layers();
    let act = arch.activation();
    let batch_len = labels.len();
    if batch_len == 0 {
        return Err(Error::EmptyBatch);
    }

    // dL/dz at the top: (softmax - onehot) / B.
    let logits = cache.logits();
    let mut dz = softmax(logits);
    let inv_b = 1.0 / batch_len as f64;
    for (r, &y) in labels.iter().enumerate() {
        let row = dz.row_mut(r);
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v *= inv_b;
        }
    }

    let mut grad = ParamVector::zeros(arch);
    let mut dzs = vec![Matrix::zeros(0, 0); num_layers];
    let mut dins = vec![Matrix::zeros(0, 0); num_layers];

    for l in (0..num_layers).rev() {
        let input = &cache.inputs[l];
        let block = theta.layout().blocks()[l];
        let w = layer_weight_matrix(theta, l);

        let dw = linalg::mul_t_a(input, &dz);
        let db = linalg::col_sums(&dz);
        grad.values_mut()
            [block.weight_offset..block.weight_offset + block.in_dim * block.out_dim]
            .copy_from_slice(dw.data());
        grad.values_mut()[block.bias_offset..block.bias_offset + block.out_dim]
            .copy_from_slice(&db);

        let din = linalg::mul_t_b(&dz, &w);
        let next_dz = if l > 0 {
            // Gate through the activation that produced this layer's input.
            let z_prev = &cache.zs[l - 1];
            let mut dz_prev = Matrix::zeros(din.rows(), din.cols());
            for ((o, &zv), &dv) in dz_prev
                .data_mut()
                .iter_mut()
                .zip(z_prev.data())
                .zip(din.data())
            {
                *o = act.apply(zv).1 * dv;
            }
            Some(dz_prev)
        } else {
            None
        };
        dins[l] = din;
        dzs[l] = dz;
        match next_dz {
            Some(v) => dz = v,
            None => break,
        }
    }

    Ok(Backprop { dzs, dins, grad })
}

/// Exact gradient of `loss` with respect to the parameters.
pub fn grad(arch: &ArchSpec, theta: &ParamVector, batch: &LabeledBatch) -> Result<ParamVector> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let cache = forward_cached(arch, theta, batch.features())?;
    Ok(backprop(arch, theta, &cache, batch.labels())?.grad)
}

/// Loss and gradient from a single forward/backward pass.
pub fn loss_and_grad(
    arch: &ArchSpec,
    theta: &ParamVector,
    batch: &LabeledBatch,
) -> Result<(f64, ParamVector)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let cache = forward_cached(arch, theta, batch.features())?;
    let value = loss_from_logits(cache.logits(), batch.labels())?;
    let bp = backprop(arch, theta, &cache, batch.labels())?;
    Ok((value, bp.grad))
}
