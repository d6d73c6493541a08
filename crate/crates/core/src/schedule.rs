//! Training schedules: expansions of a distilled learning-rate program
//! into a (usually longer) plain-gradient-descent training plan.
//!
//! A schedule is a flat list of steps, each naming the synthetic batch to
//! train on and the step size to use, grouped into epochs of exactly `s`
//! steps with batch indices cycling `0..s−1`. Four constructions:
//!
//! * **raw** — replay the distilled `η̃` once, in order.
//! * **strategy 1** — discard `η̃`; per-epoch constant rates that grow
//!   ×1.1 per epoch through a warm-up phase, then shrink ×0.95 per epoch.
//! * **strategy 2** — repeat the whole program R times, repetition `r`
//!   (0-based) scaled by `decay^r`.
//! * **strategy 3** — play the program once, then append copies of the
//!   last epoch, copy `r` (1-based) scaled by `decay^r`.

use crate::distill::SyntheticData;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

pub const DEFAULT_DECAY: f64 = 0.98;
pub const DEFAULT_WARM_EPOCHS: usize = 10;
pub const DEFAULT_TOTAL_EPOCHS: usize = 50;
pub const DEFAULT_BASE_LR: f64 = 0.01;
/// Default strategy-2 repetition count: 10 × 5 inner epochs = 50 epochs.
pub const DEFAULT_S2_REPETITIONS: usize = 10;
/// Default strategy-3 repetition count: 5 + 45 = 50 epochs.
pub const DEFAULT_S3_REPETITIONS: usize = 45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyTag {
    Raw,
    Strategy1,
    Strategy2,
    Strategy3,
}

impl fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StrategyTag::Raw => "raw",
            StrategyTag::Strategy1 => "strategy1",
            StrategyTag::Strategy2 => "strategy2",
            StrategyTag::Strategy3 => "strategy3",
        };
        write!(f, "{name}")
    }
}

/// The parameters a schedule was built with (for config echo and reports).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScheduleParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warm_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
}

/// One gradient-descent step of a training plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub epoch: usize,
    /// Position within the epoch, `0..s`.
    pub position: usize,
    /// Synthetic batch to train on; equals `position` for all strategies.
    pub batch_index: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    entries: Vec<ScheduleEntry>,
    steps_per_epoch: usize,
    strategy: StrategyTag,
    params: ScheduleParams,
}

impl TrainingSchedule {
    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.steps_per_epoch
    }

    pub fn epochs(&self) -> usize {
        self.entries.len() / self.steps_per_epoch
    }

    pub fn strategy(&self) -> StrategyTag {
        self.strategy
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    pub fn lrs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lr).collect()
    }

    /// Structural invariants: whole epochs of `s` steps, batch indices
    /// cycling in order, strictly positive rates.
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_epoch == 0 {
            return Err(Error::InvalidConfig("steps_per_epoch must be >= 1".into()));
        }
        if !self.entries.len().is_multiple_of(self.steps_per_epoch) {
            return Err(Error::InvalidConfig(format!(
                "{} entries do not form whole epochs of {}",
                self.entries.len(),
                self.steps_per_epoch
            )));
        }
        for (g, entry) in self.entries.iter().enumerate() {
            let (e, p) = (g / self.steps_per_epoch, g % self.steps_per_epoch);
            if entry.epoch != e || entry.position != p || entry.batch_index != p {
                return Err(Error::InvalidConfig(format!(
                    "entry {g} is ({}, {}, {}), expected ({e}, {p}, {p})",
                    entry.epoch, entry.position, entry.batch_index
                )));
            }
            // NaN fails the comparison and is rejected along with lr <= 0.
            if entry.lr.is_nan() || entry.lr <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "entry {g} has non-positive lr {}",
                    entry.lr
                )));
            }
        }
        Ok(())
    }
}

fn from_lrs(
    lrs: impl IntoIterator<Item = f64>,
    s: usize,
    strategy: StrategyTag,
    params: ScheduleParams,
) -> TrainingSchedule {
    let entries = lrs
        .into_iter()
        .enumerate()
        .map(|(g, lr)| ScheduleEntry {
            epoch: g / s,
            position: g % s,
            batch_index: g % s,
            lr,
        })
        .collect();
    TrainingSchedule {
        entries,
        steps_per_epoch: s,
        strategy,
        params,
    }
}

/// Replays the distilled learning rates exactly once.
pub fn raw_schedule(syn: &SyntheticData) -> TrainingSchedule {
    from_lrs(
        syn.lrs().iter().copied(),
        syn.steps_per_epoch(),
        StrategyTag::Raw,
        ScheduleParams::default(),
    )
}

/// Geometric warm-up then geometric decay, ignoring the distilled rates:
/// epoch `e < warm_epochs` uses `base_lr·1.1^e`; later epochs continue from
/// the peak with `base_lr·1.1^(warm_epochs−1)·0.95^(e−warm_epochs+1)`.
pub fn strategy1(
    s: usize,
    total_epochs: usize,
    base_lr: f64,
    warm_epochs: usize,
) -> Result<TrainingSchedule> {
    if s == 0 {
        return Err(Error::InvalidConfig("steps_per_epoch must be >= 1".into()));
    }
    if base_lr.is_nan() || base_lr <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "base_lr must be > 0, got {base_lr}"
        )));
    }
    if warm_epochs == 0 || warm_epochs > total_epochs {
        return Err(Error::InvalidConfig(format!(
            "warm_epochs must be in 1..=total_epochs, got {warm_epochs} of {total_epochs}"
        )));
    }
    let epoch_lr = |e: usize| -> f64 {
        if e < warm_epochs {
            base_lr * 1.1f64.powi(e as i32)
        } else {
            base_lr
                * 1.1f64.powi(warm_epochs as i32 - 1)
                * 0.95f64.powi((e - warm_epochs + 1) as i32)
        }
    };
    let lrs = (0..total_epochs).flat_map(|e| std::iter::repeat_n(epoch_lr(e), s));
    Ok(from_lrs(
        lrs,
        s,
        StrategyTag::Strategy1,
        ScheduleParams {
            base_lr: Some(base_lr),
            warm_epochs: Some(warm_epochs),
            total_epochs: Some(total_epochs),
            ..ScheduleParams::default()
        },
    ))
}

/// Repeats the whole distilled program `repetitions` times, repetition `r`
/// (0-based) scaled by `decay^r`.
pub fn strategy2(syn: &SyntheticData, repetitions: usize, decay: f64) -> Result<TrainingSchedule> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be >= 1".into()));
    }
    check_decay(decay)?;
    let base = syn.lrs();
    let mut lrs = Vec::with_capacity(repetitions * base.len());
    for r in 0..repetitions {
        let factor = decay.powi(r as i32);
        lrs.extend(base.iter().map(|lr| lr * factor));
    }
    Ok(from_lrs(
        lrs,
        syn.steps_per_epoch(),
        StrategyTag::Strategy2,
        ScheduleParams {
            repetitions: Some(repetitions),
            decay: Some(decay),
            ..ScheduleParams::default()
        },
    ))
}

/// Plays the distilled program once, then appends `repetitions` copies of
/// its final epoch, copy `r` (1-based) scaled by `decay^r`.
pub fn strategy3(syn: &SyntheticData, repetitions: usize, decay: f64) -> Result<TrainingSchedule> {
    check_decay(decay)?;
    if syn.inner_epochs() == 0 && repetitions > 0 {
        return Err(Error::InvalidConfig(
            "cannot repeat the last epoch of an empty program".into(),
        ));
    }
    let base = syn.lrs();
    let s = syn.steps_per_epoch();
    let last_epoch = &base[base.len().saturating_sub(s)..];
    let mut lrs = base.to_vec();
    for r in 1..=repetitions {
        let factor = decay.powi(r as i32);
        lrs.extend(last_epoch.iter().map(|lr| lr * factor));
    }
    Ok(from_lrs(
        lrs,
        s,
        StrategyTag::Strategy3,
        ScheduleParams {
            repetitions: Some(repetitions),
            decay: Some(decay),
            ..ScheduleParams::default()
        },
    ))
}

fn check_decay(decay: f64) -> Result<()> {
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "decay must be in (0, 1], got {decay}"
        )));
    }
    Ok(())
}

/// A strategy selection with its parameters, expandable against any
/// distilled dataset. This is what evaluation configs and the command line
/// carry around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum StrategyChoice {
    Raw,
    Strategy1 {
        total_epochs: usize,
        base_lr: f64,
        warm_epochs: usize,
    },
    Strategy2 {
        repetitions: usize,
        decay: f64,
    },
    Strategy3 {
        repetitions: usize,
        decay: f64,
    },
}

impl StrategyChoice {
    /// The four strategies at their default parameters.
    pub fn default_for(tag: StrategyTag) -> Self {
        match tag {
            StrategyTag::Raw => StrategyChoice::Raw,
            StrategyTag::Strategy1 => StrategyChoice::Strategy1 {
                total_epochs: DEFAULT_TOTAL_EPOCHS,
                base_lr: DEFAULT_BASE_LR,
                warm_epochs: DEFAULT_WARM_EPOCHS,
            },
            StrategyTag::Strategy2 => StrategyChoice::Strategy2 {
                repetitions: DEFAULT_S2_REPETITIONS,
                decay: DEFAULT_DECAY,
            },
            StrategyTag::Strategy3 => StrategyChoice::Strategy3 {
                repetitions: DEFAULT_S3_REPETITIONS,
                decay: DEFAULT_DECAY,
            },
        }
    }

    pub fn tag(&self) -> StrategyTag {
        match self {
            StrategyChoice::Raw => StrategyTag::Raw,
            StrategyChoice::Strategy1 { .. } => StrategyTag::Strategy1,
            StrategyChoice::Strategy2 { .. } => StrategyTag::Strategy2,
            StrategyChoice::Strategy3 { .. } => StrategyTag::Strategy3,
        }
    }

    pub fn label(&self) -> String {
        self.tag().to_string()
    }

    /// Builds the concrete schedule for one distilled dataset.
    pub fn expand(&self, syn: &SyntheticData) -> Result<TrainingSchedule> {
        match *self {
            StrategyChoice::Raw => Ok(raw_schedule(syn)),
            StrategyChoice::Strategy1 {
                total_epochs,
                base_lr,
                warm_epochs,
            } => strategy1(syn.steps_per_epoch(), total_epochs, base_lr, warm_epochs),
            StrategyChoice::Strategy2 { repetitions, decay } => {
                strategy2(syn, repetitions, decay)
            }
            StrategyChoice::Strategy3 { repetitions, decay } => {
                strategy3(syn, repetitions, decay)
            }
        }
    }
}

impl std::str::FromStr for StrategyChoice {
    type Err = Error;

    /// Accepts `raw`, `s1`/`strategy1`, `s2`/`strategy2`, `s3`/`strategy3`
    /// (default parameters).
    fn from_str(s: &str) -> Result<Self> {
        let tag = match s {
            "raw" => StrategyTag::Raw,
            "s1" | "strategy1" => StrategyTag::Strategy1,
            "s2" | "strategy2" => StrategyTag::Strategy2,
            "s3" | "strategy3" => StrategyTag::Strategy3,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown strategy `{other}` (expected raw, s1, s2, or s3)"
                )))
            }
        };
        Ok(StrategyChoice::default_for(tag))
    }
}

/// CSV export: `global_step,epoch,batch_index,lr`.
pub fn write_csv(sched: &TrainingSchedule, path: &Path) -> Result<()> {
    let mut out = String::from("global_step,epoch,batch_index,lr\n");
    for (g, entry) in sched.entries().iter().enumerate() {
        out.push_str(&format!(
            "{g},{},{},{:.16e}\n",
            entry.epoch, entry.batch_index, entry.lr
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
