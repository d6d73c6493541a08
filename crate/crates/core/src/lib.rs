//! Distills small tabular datasets into a handful of synthetic objects plus
//! per-step learning rates by backpropagating through unrolled gradient
//! descent, then measures how well models of several architectures train on
//! the result.
//!
//! The crate is organized around the experiment pipeline:
//!
//! - [`data`]: two-moons generation, train/test split, standardization, CSV.
//! - [`net`]: the fully connected model family with exact first- and
//!   second-order derivative products.
//! - [`distill`]: the unrolled inner loop, the reverse hypergradient pass,
//!   and the outer optimization of synthetic objects and learning rates.
//! - [`schedule`]: expansion of a distilled learning-rate program into longer
//!   training schedules.
//! - [`eval`]: training harness, bootstrap confidence intervals,
//!   cross-architecture result matrices, decision-boundary grids.
//! - [`plot`]: SVG renderings of the exported CSV data.
//!
//! All randomness derives from explicit seeds (see [`seed`]); single-threaded
//! runs are bit-reproducible, and the parallel paths are seeded per work item
//! so thread count does not change results.

pub mod data;
pub mod distill;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod net;
pub mod plot;
pub mod schedule;
pub mod seed;

pub use error::{Error, Result};
pub use linalg::Matrix;
