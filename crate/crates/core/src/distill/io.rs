//! On-disk formats for distilled datasets.
//!
//! The primary format is one versioned JSON document:
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "metadata": { architectures, config, seeds, counters, loss log, replays },
//!   "epochs": [ { "steps": [ { "lr", "objects": [[x1, x2], …], "labels" } ] } ]
//! }
//! ```
//!
//! Every inner epoch lists all `s` steps; the synthetic objects repeat
//! across epochs (the unroll reuses the same batches) while each step
//! carries its own learning rate. The loader checks that repetition, so a
//! hand-edited file with drifting objects is rejected rather than silently
//! averaged. Doubles round-trip bit-exactly through the JSON encoder, which
//! is what makes byte-identical rerun comparisons meaningful.
//!
//! A flat CSV export (epoch, step, object_index, x1…, label, lr) serves
//! plotting; it is not a load format.

use super::{DistillMetadata, SyntheticData};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::net::LabeledBatch;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Document {
    format_version: u32,
    metadata: DistillMetadata,
    epochs: Vec<EpochDoc>,
}

#[derive(Serialize, Deserialize)]
struct EpochDoc {
    steps: Vec<StepDoc>,
}

#[derive(Serialize, Deserialize)]
struct StepDoc {
    lr: f64,
    objects: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

/// Serializes a distilled dataset to the versioned JSON document.
///
/// Requires at least one inner epoch; a zero-epoch dataset has no steps to
/// carry its objects.
pub fn write_json(syn: &SyntheticData, path: &Path) -> Result<()> {
    std::fs::write(path, to_json_string(syn)?)?;
    Ok(())
}

pub fn to_json_string(syn: &SyntheticData) -> Result<String> {
    if syn.inner_epochs() == 0 {
        return Err(Error::InvalidConfig(
            "cannot serialize a dataset with zero inner epochs".into(),
        ));
    }
    let s = syn.steps_per_epoch();
    let mut epochs = Vec::with_capacity(syn.inner_epochs());
    for e in 0..syn.inner_epochs() {
        let mut steps = Vec::with_capacity(s);
        for p in 0..s {
            let batch = syn.batch(p);
            steps.push(StepDoc {
                lr: syn.lrs()[e * s + p],
                objects: (0..batch.len()).map(|r| batch.features().row(r).to_vec()).collect(),
                labels: batch.labels().to_vec(),
            });
        }
        epochs.push(EpochDoc { steps });
    }
    let doc = Document {
        format_version: syn.metadata().format_version,
        metadata: syn.metadata().clone(),
        epochs,
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Loads a distilled dataset, validating version, shape, and the
/// cross-epoch repetition of objects and labels.
pub fn read_json(path: &Path) -> Result<SyntheticData> {
    from_json_str(&std::fs::read_to_string(path)?)
}

pub fn from_json_str(text: &str) -> Result<SyntheticData> {
    let doc: Document = serde_json::from_str(text)?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported distilled-data format version {} (expected {FORMAT_VERSION})",
            doc.format_version
        )));
    }
    let first = doc
        .epochs
        .first()
        .ok_or_else(|| Error::InvalidConfig("document has no epochs".into()))?;
    let s = first.steps.len();
    if s == 0 {
        return Err(Error::InvalidConfig("epoch 0 has no steps".into()));
    }
    let mut batches = Vec::with_capacity(s);
    for (p, step) in first.steps.iter().enumerate() {
        let features = Matrix::from_rows(&step.objects)
            .map_err(|e| Error::InvalidConfig(format!("step {p} objects: {e}")))?;
        batches.push(LabeledBatch::new(features, step.labels.clone())?);
    }
    let mut lrs = Vec::with_capacity(doc.epochs.len() * s);
    for (e, epoch) in doc.epochs.iter().enumerate() {
        if epoch.steps.len() != s {
            return Err(Error::Shape(format!(
                "epoch {e} has {} steps, epoch 0 has {s}",
                epoch.steps.len()
            )));
        }
        for (p, step) in epoch.steps.iter().enumerate() {
            if e > 0 {
                let reference = &first.steps[p];
                if step.objects != reference.objects || step.labels != reference.labels {
                    return Err(Error::InvalidConfig(format!(
                        "epoch {e} step {p} objects differ from epoch 0 \
                         (synthetic batches must repeat across epochs)"
                    )));
                }
            }
            lrs.push(step.lr);
        }
    }
    SyntheticData::new(batches, lrs, doc.epochs.len(), doc.metadata)
}

/// Flat CSV export for plotting: one row per (epoch, step, object).
pub fn write_csv(syn: &SyntheticData, path: &Path) -> Result<()> {
    let d = syn.feature_dim();
    let mut out = String::from("epoch,step,object_index");
    for i in 1..=d {
        out.push_str(&format!(",x{i}"));
    }
    out.push_str(",label,lr\n");
    let s = syn.steps_per_epoch();
    for e in 0..syn.inner_epochs() {
        for p in 0..s {
            let batch = syn.batch(p);
            let lr = syn.lrs()[e * s + p];
            for r in 0..batch.len() {
                out.push_str(&format!("{e},{p},{r}"));
                for c in 0..d {
                    out.push_str(&format!(",{:.16e}", batch.features().get(r, c)));
                }
                out.push_str(&format!(",{},{lr:.16e}\n", batch.labels()[r]));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Per-outer-epoch mean real-batch loss, from the run metadata.
pub fn write_loss_log(syn: &SyntheticData, path: &Path) -> Result<()> {
    let mut out = String::from("outer_epoch,mean_loss\n");
    for (e, loss) in syn.metadata().outer_loss_per_epoch.iter().enumerate() {
        out.push_str(&format!("{e},{loss:.16e}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}
