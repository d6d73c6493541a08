//! Second-order derivative products of the classification loss.
//!
//! Both products are directional derivatives of the reverse pass: perturb the
//! parameters along `v`, propagate the perturbation forward (tangents of every
//! `z` and activation), then through the reverse pass (tangents of every `dz`
//! and `din`). The tangent of the parameter gradient is `v^T ∂²l/∂θ²`; the
//! tangent of the feature gradient is `v^T ∂²l/∂θ∂x`. One call evaluates the
//! loss about three times, independent of the parameter count.
//!
//! For relu the activation curvature is zero, so the tangent of the gate is
//! dropped and the products are exact on each linear piece.

use super::arch::ArchSpec;
use super::batch::LabeledBatch;
use super::ops::{backprop, forward_cached, softmax, Backprop, ForwardCache};
use super::params::ParamVector;
use crate::error::{shape_err, Error, Result};
use crate::linalg::{self, Matrix};

/// Gradient plus both second-order products for one `(theta, batch, v)`.
pub struct SecondOrder {
    /// dL/dθ at `theta`.
    pub grad: ParamVector,
    /// `v^T ∂²l/∂θ²`, same layout as `theta`.
    pub hvp: ParamVector,
    /// `v^T ∂²l/∂θ∂x`, shaped like the batch features.
    pub mixed: Matrix,
}

/// Computes gradient, Hessian-vector product, and mixed product together.
pub fn grad_and_products(
    arch: &ArchSpec,
    theta: &ParamVector,
    batch: &LabeledBatch,
    v: &ParamVector,
) -> Result<SecondOrder> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !theta.same_layout(v) {
        return Err(shape_err(
            "direction vector layout does not match parameter layout",
        ));
    }
    let cache = forward_cached(arch, theta, batch.features())?;
    let bp = backprop(arch, theta, &cache, batch.labels())?;
    let (hvp, mixed) = tangent_pass(arch, theta, &cache, &bp, v, batch.len());
    Ok(SecondOrder {
        grad: bp.grad,
        hvp,
        mixed,
    })
}

/// `v^T ∂²l/∂θ²`: tangent of the parameter gradient along `v`.
pub fn hvp(
    arch: &ArchSpec,
    theta: &ParamVector,
    batch: &LabeledBatch,
    v: &ParamVector,
) -> Result<ParamVector> {
    Ok(grad_and_products(arch, theta, batch, v)?.hvp)
}

/// `v^T ∂²l/∂θ∂x`: the feature-space gradient of `⟨v, ∇_θ l⟩`.
pub fn mixed_vjp(
    arch: &ArchSpec,
    theta: &ParamVector,
    batch: &LabeledBatch,
    v: &ParamVector,
) -> Result<Matrix> {
    Ok(grad_and_products(arch, theta, batch, v)?.mixed)
}

fn weight_matrix(p: &ParamVector, l: usize) -> Matrix {
    let b = p.layout().blocks()[l];
    Matrix::from_vec(b.in_dim, b.out_dim, p.weights(l).to_vec()).expect("layout slice")
}

fn tangent_pass(
    arch: &ArchSpec,
    theta: &ParamVector,
    cache: &ForwardCache,
    bp: &Backprop,
    v: &ParamVector,
    batch_len: usize,
) -> (ParamVector, Matrix) {
    let num_layers = arch.num_layers();
    let act = arch.activation();

    // Tangent forward: r_in and r_z for every layer.
    let mut rzs = Vec::with_capacity(num_layers);
    let mut rins = Vec::with_capacity(num_layers);
    let mut rin = Matrix::zeros(cache.inputs[0].rows(), cache.inputs[0].cols());
    for l in 0..num_layers {
        let w = weight_matrix(theta, l);
        let vw = weight_matrix(v, l);
        let mut rz = linalg::mul(&rin, &w);
        rz.add_scaled(&linalg::mul(&cache.inputs[l], &vw), 1.0);
        for r in 0..rz.rows() {
            for (o, &vb) in rz.row_mut(r).iter_mut().zip(v.biases(l)) {
                *o += vb;
            }
        }
        let next_rin = if l + 1 < num_layers {
            let z = &cache.zs[l];
            let mut next = Matrix::zeros(rz.rows(), rz.cols());
            for ((o, &zv), &rv) in next.data_mut().iter_mut().zip(z.data()).zip(rz.data()) {
                *o = act.apply(zv).1 * rv;
            }
            next
        } else {
            Matrix::zeros(0, 0)
        };
        rins.push(rin);
        rzs.push(rz);
        rin = next_rin;
    }

    // Tangent of the top gradient (p - Y)/B: softmax Jacobian applied to rz.
    let logits = cache.logits();
    let p = softmax(logits);
    let rz_top = &rzs[num_layers - 1];
    let mut rdz = Matrix::zeros(p.rows(), p.cols());
    let inv_b = 1.0 / batch_len as f64;
    for r in 0..p.rows() {
        let prow = p.row(r);
        let rzrow = rz_top.row(r);
        let dot: f64 = prow.iter().zip(rzrow).map(|(&pv, &rv)| pv * rv).sum();
        for (c, o) in rdz.row_mut(r).iter_mut().enumerate() {
            *o = prow[c] * (rzrow[c] - dot) * inv_b;
        }
    }

    // Tangent backward.
    let mut hvp = ParamVector::zeros(arch);
    let mut mixed = Matrix::zeros(0, 0);
    for l in (0..num_layers).rev() {
        let block = theta.layout().blocks()[l];
        let w = weight_matrix(theta, l);
        let vw = weight_matrix(v, l);
        let dz = &bp.dzs[l];

        let mut rdw = linalg::mul_t_a(&rins[l], dz);
        rdw.add_scaled(&linalg::mul_t_a(&cache.inputs[l], &rdz), 1.0);
        let rdb = linalg::col_sums(&rdz);
        hvp.values_mut()
            [block.weight_offset..block.weight_offset + block.in_dim * block.out_dim]
            .copy_from_slice(rdw.data());
        hvp.values_mut()[block.bias_offset..block.bias_offset + block.out_dim]
            .copy_from_slice(&rdb);

        let mut rdin = linalg::mul_t_b(&rdz, &w);
        rdin.add_scaled(&linalg::mul_t_b(dz, &vw), 1.0);

        if l > 0 {
            // rdz_{l-1} = act''(z)·rz·din + act'(z)·rdin, evaluated elementwise.
            let z_prev = &cache.zs[l - 1];
            let a_prev = &cache.inputs[l]; // act(z_prev)
            let rz_prev = &rzs[l - 1];
            let din = &bp.dins[l];
            let mut next = Matrix::zeros(rdin.rows(), rdin.cols());
            for i in 0..next.data().len() {
                let zv = z_prev.data()[i];
                let av = a_prev.data()[i];
                let curvature = act.second_deriv(av) * rz_prev.data()[i] * din.data()[i];
                next.data_mut()[i] = curvature + act.apply(zv).1 * rdin.data()[i];
            }
            rdz = next;
        } else {
            mixed = rdin;
        }
    }

    (hvp, mixed)
}
