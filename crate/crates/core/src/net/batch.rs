//! Labeled feature batches.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};

/// A batch of objects: one feature row per object plus a class index in {0,1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBatch {
    features: Matrix,
    labels: Vec<usize>,
}

impl LabeledBatch {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("batch features contain NaN/Inf".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= super::arch::NUM_CLASSES) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range (two classes)"
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    /// Mutable feature access, used by the outer loop when synthetic objects
    /// are themselves the optimization variables.
    pub fn features_mut(&mut self) -> &mut Matrix {
        &mut self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Sub-batch with the given rows, in order.
    pub fn select(&self, indices: &[usize]) -> LabeledBatch {
        LabeledBatch {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}
