//! Dataset generation, splitting, standardization, and CSV interchange.
//!
//! The built-in generator is the two-moons construction: two interleaved
//! unit-radius half circles, the second shifted to `(1, 0.5)` and reflected,
//! with isotropic Gaussian coordinate noise. External tabular data can be
//! ingested from CSV instead (feature columns plus a `label` column).

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::net::LabeledBatch;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Full,
    Train,
    Test,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitTag::Full => write!(f, "full"),
            SplitTag::Train => write!(f, "train"),
            SplitTag::Test => write!(f, "test"),
        }
    }
}

/// Per-feature affine constants fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Where a dataset came from and what was done to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub n_total: usize,
    pub noise_std: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Standardization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    split: SplitTag,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        split: SplitTag,
        provenance: Provenance,
    ) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::InvalidConfig("dataset must be nonempty".into()));
        }
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            split,
            provenance,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
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

    pub fn split_tag(&self) -> SplitTag {
        self.split
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn to_batch(&self) -> LabeledBatch {
        LabeledBatch::new(self.features.clone(), self.labels.clone())
            .expect("dataset invariants imply a valid batch")
    }

    pub fn batch_of(&self, indices: &[usize]) -> LabeledBatch {
        LabeledBatch::new(
            self.features.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
        .expect("dataset invariants imply a valid batch")
    }

    pub fn class_count(&self, class: usize) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }
}

/// Generates the two-moons dataset: `n_total/2` points per class.
///
/// Class 0 lies on the upper arc `(cos t, sin t)`, class 1 on the shifted
/// reflected arc `(1 - cos t, 0.5 - sin t)`, `t` uniform on `[0, π]`, with
/// `N(0, noise_std²)` added to both coordinates.
pub fn generate_moons(n_total: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if n_total < 2 || !n_total.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "n_total must be even and >= 2, got {n_total}"
        )));
    }
    if noise_std.is_nan() || noise_std < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "noise_std must be >= 0, got {noise_std}"
        )));
    }
    let per_class = n_total / 2;
    let mut rng = crate::seed::rng(seed);
    let noise = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rows = Vec::with_capacity(n_total);
    let mut labels = Vec::with_capacity(n_total);
    for class in 0..2usize {
        for _ in 0..per_class {
            let t: f64 = rng.gen::<f64>() * PI;
            let (mut x, mut y) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            if noise_std > 0.0 {
                x += noise.sample(&mut rng);
                y += noise.sample(&mut rng);
            }
            rows.push(vec![x, y]);
            labels.push(class);
        }
    }
    Dataset::new(
        Matrix::from_rows(&rows)?,
        labels,
        SplitTag::Full,
        Provenance {
            generator: "moons".into(),
            n_total,
            noise_std,
            seed,
            split_seed: None,
            train_fraction: None,
            standardization: None,
        },
    )
}

/// Stratified train/test split of a full dataset.
///
/// Per class, `round(fraction * count)` points go to the train side; row
/// order within each side follows the original dataset.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if data.split != SplitTag::Full {
        return Err(Error::InvalidConfig(
            "split expects the full dataset, not an existing split".into(),
        ));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = crate::seed::rng(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in 0..2usize {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == class).collect();
        members.shuffle(&mut rng);
        let n_train = (train_fraction * members.len() as f64).round() as usize;
        let n_train = n_train.min(members.len());
        train_idx.extend_from_slice(&members[..n_train]);
        test_idx.extend_from_slice(&members[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let make = |indices: &[usize], tag: SplitTag| -> Result<Dataset> {
        let mut prov = data.provenance.clone();
        prov.split_seed = Some(seed);
        prov.train_fraction = Some(train_fraction);
        Dataset::new(
            data.features.select_rows(indices),
            indices.iter().map(|&i| data.labels[i]).collect(),
            tag,
            prov,
        )
    };
    Ok((make(&train_idx, SplitTag::Train)?, make(&test_idx, SplitTag::Test)?))
}

/// Standardizes both splits with per-feature mean/std fitted on train only.
///
/// Uses the population standard deviation (divide by N). The fitted
/// constants are recorded in both datasets' provenance.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset)> {
    if train.feature_dim() != test.feature_dim() {
        return Err(Error::Shape(
            "train and test feature dimensions differ".into(),
        ));
    }
    let dim = train.feature_dim();
    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    let mut std = vec![0.0; dim];
    for r in 0..train.len() {
        for (m, &v) in mean.iter_mut().zip(train.features.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    for r in 0..train.len() {
        for c in 0..dim {
            let d = train.features.get(r, c) - mean[c];
            std[c] += d * d;
        }
    }
    for (c, s) in std.iter_mut().enumerate() {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            return Err(Error::ZeroVariance(c));
        }
    }

    let constants = Standardization {
        mean: mean.clone(),
        std: std.clone(),
    };
    let apply = |d: &Dataset| -> Dataset {
        let mut features = d.features.clone();
        for r in 0..features.rows() {
            for c in 0..dim {
                let v = (features.get(r, c) - mean[c]) / std[c];
                features.set(r, c, v);
            }
        }
        let mut prov = d.provenance.clone();
        prov.standardization = Some(constants.clone());
        Dataset {
            features,
            labels: d.labels.clone(),
            split: d.split,
            provenance: prov,
        }
    };
    Ok((apply(train), apply(test)))
}

fn format_double(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `x1,...,xd,label` rows with round-trip-exact doubles.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let dim = data.feature_dim();
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push_str(",label\n");
    for r in 0..data.len() {
        for c in 0..dim {
            out.push_str(&format_double(data.features.get(r, c)));
            out.push(',');
        }
        out.push_str(&data.labels[r].to_string());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes the generator/split/standardization record next to a CSV.
pub fn write_provenance(data: &Dataset, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&data.provenance)?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

/// Reads a dataset from CSV. A header row is required and its last column
/// must be `label`; all other columns are features.
pub fn read_csv(path: &Path, split: SplitTag) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Csv(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || *cols.last().unwrap() != "label" {
        return Err(Error::Csv(format!(
            "{}: header must end with a `label` column",
            path.display()
        )));
    }
    let dim = cols.len() - 1;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::Csv(format!(
                "{}:{}: expected {} fields, got {}",
                path.display(),
                lineno + 1,
                dim + 1,
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(dim);
        for f in &fields[..dim] {
            row.push(f.parse::<f64>().map_err(|_| {
                Error::Csv(format!(
                    "{}:{}: bad number `{f}`",
                    path.display(),
                    lineno + 1
                ))
            })?);
        }
        let label_raw: f64 = fields[dim].parse().map_err(|_| {
            Error::Csv(format!(
                "{}:{}: bad label `{}`",
                path.display(),
                lineno + 1,
                fields[dim]
            ))
        })?;
        if label_raw != 0.0 && label_raw != 1.0 {
            return Err(Error::Csv(format!(
                "{}:{}: label must be 0 or 1, got {label_raw}",
                path.display(),
                lineno + 1
            )));
        }
        rows.push(row);
        labels.push(label_raw as usize);
    }
    Dataset::new(
        Matrix::from_rows(&rows)?,
        labels,
        split,
        Provenance {
            generator: format!("csv:{}", path.display()),
            n_total: 0,
            noise_std: 0.0,
            seed: 0,
            split_seed: None,
            train_fraction: None,
            standardization: None,
        },
    )
}
