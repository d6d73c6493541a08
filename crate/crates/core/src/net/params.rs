//! Flat parameter vectors with a per-layer layout map.
//!
//! All model parameters live in one `Vec<f64>` so the distillation engine can
//! treat them as ordinary vectors (axpy, dot, clone-as-snapshot). The layout
//! maps flat offsets back to `(weight matrix, bias)` blocks per layer; two
//! vectors of the same architecture share the same layout, which is what makes
//! elementwise arithmetic between them meaningful.

use super::arch::ArchSpec;
use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

/// Offsets of one affine layer inside the flat vector.
///
/// The weight matrix is stored row-major with shape `(in_dim, out_dim)`, so
/// `w[i*out_dim + j]` connects input `i` to output `j`; the bias follows it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerBlock {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    blocks: Vec<LayerBlock>,
    total_len: usize,
}

impl ParamLayout {
    pub fn of(arch: &ArchSpec) -> Self {
        let mut blocks = Vec::with_capacity(arch.num_layers());
        let mut offset = 0;
        for (in_dim, out_dim) in arch.layer_dims() {
            blocks.push(LayerBlock {
                in_dim,
                out_dim,
                weight_offset: offset,
                bias_offset: offset + in_dim * out_dim,
            });
            offset += in_dim * out_dim + out_dim;
        }
        Self {
            blocks,
            total_len: offset,
        }
    }

    pub fn blocks(&self) -> &[LayerBlock] {
        &self.blocks
    }

    pub fn total_len(&self) -> usize {
        self.total_len
    }
}

/// A model's parameters as a flat vector plus its layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: ParamLayout,
}

impl ParamVector {
    pub fn zeros(arch: &ArchSpec) -> Self {
        let layout = ParamLayout::of(arch);
        Self {
            values: vec![0.0; layout.total_len()],
            layout,
        }
    }

    pub fn from_values(arch: &ArchSpec, values: Vec<f64>) -> crate::Result<Self> {
        let layout = ParamLayout::of(arch);
        if values.len() != layout.total_len() {
            return Err(crate::Error::Shape(format!(
                "parameter vector length {} does not match layout length {} for {arch}",
                values.len(),
                layout.total_len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        self.layout == other.layout
    }

    /// Weight slice of layer `l`, shape `(in_dim, out_dim)` row-major.
    pub fn weights(&self, l: usize) -> &[f64] {
        let b = &self.layout.blocks[l];
        &self.values[b.weight_offset..b.weight_offset + b.in_dim * b.out_dim]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let b = &self.layout.blocks[l];
        &self.values[b.bias_offset..b.bias_offset + b.out_dim]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other` (same layout required).
    pub fn add_scaled(&mut self, other: &ParamVector, alpha: f64) {
        assert!(self.same_layout(other), "ParamVector layout mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        assert!(self.same_layout(other), "ParamVector layout mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Samples initial parameters from the Xavier-uniform distribution.
///
/// Per layer, weights are i.i.d. uniform on `[-a, a]` with
/// `a = sqrt(6 / (fan_in + fan_out))`; biases are zero. Deterministic given
/// the seed: layers are filled in order, weights row-major.
pub fn xavier_init(arch: &ArchSpec, seed: u64) -> ParamVector {
    let mut rng = crate::seed::rng(seed);
    let mut theta = ParamVector::zeros(arch);
    for l in 0..arch.num_layers() {
        let b = theta.layout.blocks[l];
        let bound = (6.0 / (b.in_dim + b.out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        for w in
            &mut theta.values[b.weight_offset..b.weight_offset + b.in_dim * b.out_dim]
        {
            *w = dist.sample(&mut rng);
        }
        // biases stay zero
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::arch::Activation;

    #[test]
    fn layout_offsets_and_total() {
        let arch = ArchSpec::two_layer();
        let layout = ParamLayout::of(&arch);
        assert_eq!(layout.total_len(), 2 * 16 + 16 + 16 * 2 + 2);
        let b0 = layout.blocks()[0];
        assert_eq!((b0.in_dim, b0.out_dim), (2, 16));
        assert_eq!(b0.weight_offset, 0);
        assert_eq!(b0.bias_offset, 32);
        let b1 = layout.blocks()[1];
        assert_eq!(b1.weight_offset, 48);
        assert_eq!(b1.bias_offset, 48 + 32);
    }

    #[test]
    fn xavier_one_layer_bounds_and_zero_biases() {
        let arch = ArchSpec::one_layer();
        let theta = xavier_init(&arch, 7);
        assert_eq!(theta.len(), 6);
        let bound = (6.0_f64 / 4.0).sqrt();
        for &w in theta.weights(0) {
            assert!(w.abs() <= bound, "weight {w} out of [-{bound}, {bound}]");
        }
        assert_eq!(theta.biases(0), &[0.0, 0.0]);
    }

    #[test]
    fn xavier_is_deterministic() {
        let arch = ArchSpec::four_layer();
        let a = xavier_init(&arch, 123);
        let b = xavier_init(&arch, 123);
        assert_eq!(a.values(), b.values());
        let c = xavier_init(&arch, 124);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn xavier_first_layer_variance_matches_uniform_moment() {
        // Monte-Carlo oracle: over many seeds the empirical variance of the
        // first-layer weights must approach a^2/3 = 2/(fan_in + fan_out).
        let arch = ArchSpec::new(vec![2, 16, 2], Activation::Relu).unwrap();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for seed in 0..100_000u64 {
            let theta = xavier_init(&arch, seed);
            for &w in theta.weights(0) {
                sum += w;
                sum_sq += w * w;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let var = sum_sq / count as f64 - mean * mean;
        let expected = 2.0 / (2.0 + 16.0);
        assert!(
            (var - expected).abs() <= 0.05 * expected,
            "variance {var} not within 5% of {expected}"
        );
    }

    #[test]
    fn arithmetic_is_layout_preserving() {
        let arch = ArchSpec::two_layer();
        let mut a = xavier_init(&arch, 1);
        let b = xavier_init(&arch, 2);
        let before = a.layout.clone();
        a.add_scaled(&b, -0.5);
        assert_eq!(a.layout, before);
        assert_eq!(a.len(), b.len());
    }

    #[test]
    #[should_panic(expected = "layout mismatch")]
    fn arithmetic_rejects_mismatched_layouts() {
        let mut a = ParamVector::zeros(&ArchSpec::one_layer());
        let b = ParamVector::zeros(&ArchSpec::two_layer());
        a.add_scaled(&b, 1.0);
    }
}
