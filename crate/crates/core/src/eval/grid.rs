//! Decision-boundary grids for plotting a trained classifier.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::net::{forward, predict_row, softmax, ArchSpec, ParamVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Predicted class and class-1 probability over a regular grid.
///
/// Points are row-major with `x2` as the row coordinate: index
/// `j·resolution + i` holds the point `(x1_i, x2_j)`, both coordinates
/// spaced evenly from min to max inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionGrid {
    pub x1_range: (f64, f64),
    pub x2_range: (f64, f64),
    pub resolution: usize,
    pub classes: Vec<usize>,
    pub prob1: Vec<f64>,
}

impl DecisionGrid {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        let step = |lo: f64, hi: f64, t: usize| {
            lo + (hi - lo) * t as f64 / (self.resolution - 1) as f64
        };
        (
            step(self.x1_range.0, self.x1_range.1, i),
            step(self.x2_range.0, self.x2_range.1, j),
        )
    }

    pub fn class_at(&self, i: usize, j: usize) -> usize {
        self.classes[j * self.resolution + i]
    }

    pub fn prob1_at(&self, i: usize, j: usize) -> f64 {
        self.prob1[j * self.resolution + i]
    }
}

/// Evaluates the model over `resolution²` grid points.
pub fn decision_grid(
    arch: &ArchSpec,
    theta: &ParamVector,
    bounds: (f64, f64, f64, f64),
    resolution: usize,
) -> Result<DecisionGrid> {
    let (x1min, x1max, x2min, x2max) = bounds;
    if resolution < 2 {
        return Err(Error::InvalidConfig(format!(
            "resolution must be >= 2, got {resolution}"
        )));
    }
    // `lo < hi` is false for NaN inputs, so those are rejected here too.
    let increasing = |lo: f64, hi: f64| lo < hi;
    if !increasing(x1min, x1max) || !increasing(x2min, x2max) {
        return Err(Error::InvalidConfig(format!(
            "degenerate bounds ({x1min}, {x1max}) × ({x2min}, {x2max})"
        )));
    }
    let mut features = Matrix::zeros(resolution * resolution, 2);
    for j in 0..resolution {
        let x2 = x2min + (x2max - x2min) * j as f64 / (resolution - 1) as f64;
        for i in 0..resolution {
            let x1 = x1min + (x1max - x1min) * i as f64 / (resolution - 1) as f64;
            features.set(j * resolution + i, 0, x1);
            features.set(j * resolution + i, 1, x2);
        }
    }
    let logits = forward(arch, theta, &features)?;
    let probs = softmax(&logits);
    let classes = (0..logits.rows())
        .map(|r| predict_row(logits.row(r)))
        .collect();
    let prob1 = (0..probs.rows()).map(|r| probs.get(r, 1)).collect();
    Ok(DecisionGrid {
        x1_range: (x1min, x1max),
        x2_range: (x2min, x2max),
        resolution,
        classes,
        prob1,
    })
}

/// CSV export: `x1,x2,class,prob1`, row-major.
pub fn write_grid_csv(grid: &DecisionGrid, path: &Path) -> Result<()> {
    let mut out = String::from("x1,x2,class,prob1\n");
    for j in 0..grid.resolution {
        for i in 0..grid.resolution {
            let (x1, x2) = grid.point(i, j);
            out.push_str(&format!(
                "{x1:.6},{x2:.6},{},{:.6}\n",
                grid.class_at(i, j),
                grid.prob1_at(i, j)
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
