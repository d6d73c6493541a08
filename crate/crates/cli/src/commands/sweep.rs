//! `tabdistill sweep` — distill and evaluate once per value of a single
//! inner-loop parameter (steps, epochs, or models), holding the others fixed.

use super::{apply_global, declare_strategy_keys, load_dataset, parse_arch, strategy_from_name};
use crate::config::Resolved;
use crate::GlobalArgs;
use clap::Args;
use std::fmt::Write as _;
use tabdistill::data::SplitTag;
use tabdistill::distill::{distill, DistillConfig};
use tabdistill::eval::{cross_eval, CrossEvalConfig};
use tabdistill::{Error, Result};

#[derive(Args)]
pub struct SweepArgs {
    /// Swept parameter: inner_steps, inner_epochs, or inner_models
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated values for the swept parameter
    #[arg(long)]
    pub values: Option<String>,
    /// Standardized training CSV
    #[arg(long)]
    pub train: Option<String>,
    /// Standardized test CSV
    #[arg(long)]
    pub test: Option<String>,
    /// Architecture distilled and evaluated at every setting
    #[arg(long)]
    pub arch: Option<String>,
    /// Fixed synthetic batches per inner epoch
    #[arg(long)]
    pub inner_steps: Option<usize>,
    /// Fixed inner epochs
    #[arg(long)]
    pub inner_epochs: Option<usize>,
    /// Fixed number of inner models
    #[arg(long)]
    pub inner_models: Option<usize>,
    /// Outer epochs over the real training set
    #[arg(long)]
    pub outer_epochs: Option<usize>,
    /// Replay strategy for evaluation: raw, s1, s2, or s3
    #[arg(long)]
    pub strategy: Option<String>,
    /// Restarts per setting
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Bootstrap resamples for the confidence intervals
    #[arg(long)]
    pub resamples: Option<usize>,
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

pub fn resolve(global: &GlobalArgs, args: &SweepArgs) -> Result<Resolved> {
    let mut r = Resolved::new("sweep");
    r.string("sweep.axis", "inner_steps");
    r.string("sweep.values", "1,5,10,20,40");
    r.string("sweep.train", "out/train.csv");
    r.string("sweep.test", "out/test.csv");
    r.string("sweep.arch", "2layer");
    // Fixed-axis defaults follow the single-panel setup: one model, one
    // inner epoch, ten steps, so each axis varies against that base.
    r.int("sweep.inner_steps", 10);
    r.int("sweep.inner_epochs", 1);
    r.int("sweep.inner_models", 1);
    r.int("sweep.outer_epochs", 50);
    r.int("sweep.real_batch", 64);
    r.int("sweep.synthetic_batch", 8);
    r.float("sweep.lr_init", 0.01);
    r.float("sweep.outer_lr", 0.01);
    r.string("sweep.strategy", "raw");
    r.int("sweep.restarts", 10);
    r.int("sweep.resamples", 10_000);
    declare_strategy_keys(&mut r, "sweep");
    apply_global(&mut r, global)?;
    r.flag_str("sweep.axis", args.axis.as_deref());
    r.flag_str("sweep.values", args.values.as_deref());
    r.flag_str("sweep.train", args.train.as_deref());
    r.flag_str("sweep.test", args.test.as_deref());
    r.flag_str("sweep.arch", args.arch.as_deref());
    r.flag_usize("sweep.inner_steps", args.inner_steps);
    r.flag_usize("sweep.inner_epochs", args.inner_epochs);
    r.flag_usize("sweep.inner_models", args.inner_models);
    r.flag_usize("sweep.outer_epochs", args.outer_epochs);
    r.flag_str("sweep.strategy", args.strategy.as_deref());
    r.flag_usize("sweep.restarts", args.restarts);
    r.flag_usize("sweep.resamples", args.resamples);
    r.flag_usize("sweep.total_epochs", args.total_epochs);
    r.flag_f64("sweep.base_lr", args.base_lr);
    r.flag_usize("sweep.warm_epochs", args.warm_epochs);
    r.flag_f64("sweep.decay", args.decay);
    r.flag_usize("sweep.s2_reps", args.s2_reps);
    r.flag_usize("sweep.s3_reps", args.s3_reps);
    Ok(r)
}

fn parse_values(s: &str) -> Result<Vec<usize>> {
    let values: Vec<usize> = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad sweep value `{t}`")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    Ok(values)
}

pub fn execute(r: &Resolved) -> Result<u8> {
    let out = r.prepare_out()?;
    let axis = r.str("sweep.axis").to_string();
    if !matches!(axis.as_str(), "inner_steps" | "inner_epochs" | "inner_models") {
        return Err(Error::InvalidConfig(format!(
            "sweep axis must be exactly one of inner_steps, inner_epochs, inner_models; got `{axis}`"
        )));
    }
    let values = parse_values(r.str("sweep.values"))?;
    let arch = parse_arch(r.str("sweep.arch"))?;
    let train = load_dataset(r.str("sweep.train"), SplitTag::Train)?;
    let test = load_dataset(r.str("sweep.test"), SplitTag::Test)?;
    let choice = strategy_from_name(r, "sweep", r.str("sweep.strategy"))?;
    let master = r.u64("seed")?;

    let eval_config = CrossEvalConfig {
        distilled_restarts: r.usize("sweep.restarts")?,
        bootstrap_resamples: r.usize("sweep.resamples")?,
        ..CrossEvalConfig::defaults(vec![arch.clone()], vec![choice.clone()], master)
    };

    let mut csv = String::from("axis,value,arch,strategy,mean,std,ci_lo,ci_hi,restarts\n");
    let mut partial = false;
    for &value in &values {
        let mut cfg = DistillConfig::multi_arch(
            vec![arch.clone(); r.usize("sweep.inner_models")?.max(1)],
            master,
        );
        cfg.steps_per_epoch = r.usize("sweep.inner_steps")?;
        cfg.inner_epochs = r.usize("sweep.inner_epochs")?;
        cfg.outer_epochs = r.usize("sweep.outer_epochs")?;
        cfg.real_batch_size = r.usize("sweep.real_batch")?;
        cfg.synthetic_batch_size = r.usize("sweep.synthetic_batch")?;
        cfg.lr_init = r.f64("sweep.lr_init");
        cfg.outer_lr = r.f64("sweep.outer_lr");
        match axis.as_str() {
            "inner_steps" => cfg.steps_per_epoch = value,
            "inner_epochs" => cfg.inner_epochs = value,
            "inner_models" => cfg.architectures = vec![arch.clone(); value],
            _ => unreachable!(),
        }
        let syn = distill(&cfg, &train)?;
        // One distilled source, one strategy, one architecture: a single
        // cell whose restart seeds match a standalone eval run.
        let matrix = cross_eval(&[("distilled".into(), syn)], None, &test, &eval_config)?;
        let cell = &matrix.cells[0];
        match &cell.report {
            Some(rep) => {
                let _ = writeln!(
                    csv,
                    "{axis},{value},{},{},{:.6},{:.6},{:.6},{:.6},{}",
                    arch.label(), choice.label(), rep.mean, rep.std, rep.ci95.0, rep.ci95.1, cell.restarts,
                );
                println!(
                    "{axis} = {value:<4} {:.4} ± {:.4}  [{:.4}, {:.4}]",
                    rep.mean, rep.std, rep.ci95.0, rep.ci95.1,
                );
            }
            None => {
                let why = cell.error.clone().unwrap_or_else(|| "unknown error".into());
                let _ = writeln!(csv, "{axis},{value},{},{},,,,,{}", arch.label(), choice.label(), cell.restarts);
                println!("{axis} = {value:<4} FAILED: {why}");
                partial = true;
            }
        }
    }
    std::fs::write(out.join("sweep.csv"), csv)?;
    Ok(if partial { 4 } else { 0 })
}
