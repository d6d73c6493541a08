//! `tabdistill schedule` — expand a replay strategy against a distilled set.

use super::{apply_global, declare_strategy_keys, strategy_from_name};
use crate::config::Resolved;
use crate::GlobalArgs;
use clap::Args;
use std::path::Path;
use tabdistill::{distill, schedule, Result};

#[derive(Args)]
pub struct ScheduleArgs {
    /// Distilled dataset JSON
    #[arg(long)]
    pub distilled: Option<String>,
    /// Replay strategy: raw, s1, s2, or s3
    #[arg(long)]
    pub strategy: Option<String>,
    /// Total epochs for strategy 1
    #[arg(long)]
    pub total_epochs: Option<usize>,
    /// Warmup base learning rate for strategy 1
    #[arg(long)]
    pub base_lr: Option<f64>,
    /// Warmup length in epochs for strategy 1
    #[arg(long)]
    pub warm_epochs: Option<usize>,
    /// Per-repetition decay factor for strategies 2 and 3
    #[arg(long)]
    pub decay: Option<f64>,
    /// Full-program repetitions for strategy 2
    #[arg(long)]
    pub s2_reps: Option<usize>,
    /// Appended last-epoch repetitions for strategy 3
    #[arg(long)]
    pub s3_reps: Option<usize>,
}

pub fn resolve(global: &GlobalArgs, args: &ScheduleArgs) -> Result<Resolved> {
    let mut r = Resolved::new("schedule");
    r.string("schedule.distilled", "out/distilled.json");
    r.string("schedule.strategy", "raw");
    declare_strategy_keys(&mut r, "schedule");
    apply_global(&mut r, global)?;
    r.flag_str("schedule.distilled", args.distilled.as_deref());
    r.flag_str("schedule.strategy", args.strategy.as_deref());
    r.flag_usize("schedule.total_epochs", args.total_epochs);
    r.flag_f64("schedule.base_lr", args.base_lr);
    r.flag_usize("schedule.warm_epochs", args.warm_epochs);
    r.flag_f64("schedule.decay", args.decay);
    r.flag_usize("schedule.s2_reps", args.s2_reps);
    r.flag_usize("schedule.s3_reps", args.s3_reps);
    Ok(r)
}

pub fn execute(r: &Resolved) -> Result<u8> {
    let out = r.prepare_out()?;
    let syn = distill::read_json(Path::new(r.str("schedule.distilled")))?;
    let choice = strategy_from_name(r, "schedule", r.str("schedule.strategy"))?;
    let sched = choice.expand(&syn)?;
    sched.validate()?;
    schedule::write_csv(&sched, &out.join("schedule.csv"))?;
    println!(
        "{}: {} entries over {} epochs of {} steps",
        choice.label(),
        sched.entries().len(),
        sched.epochs(),
        sched.steps_per_epoch(),
    );
    Ok(0)
}
