//! `tabdistill distill` — run the outer optimization and save the result.

use super::{apply_global, load_dataset, parse_arch_list};
use crate::config::Resolved;
use crate::GlobalArgs;
use clap::Args;
use tabdistill::data::SplitTag;
use tabdistill::distill::{self, DistillConfig};
use tabdistill::{Error, Result};

#[derive(Args)]
pub struct DistillArgs {
    /// Standardized training CSV
    #[arg(long)]
    pub train: Option<String>,
    /// Inner architectures: one (replicated) or exactly `inner_models` names
    #[arg(long)]
    pub archs: Option<String>,
    /// Number of inner models averaged in the outer loss
    #[arg(long)]
    pub inner_models: Option<usize>,
    /// Synthetic batches per inner epoch
    #[arg(long)]
    pub inner_steps: Option<usize>,
    /// Inner epochs replaying those batches
    #[arg(long)]
    pub inner_epochs: Option<usize>,
    /// Outer epochs over the real training set
    #[arg(long)]
    pub outer_epochs: Option<usize>,
    /// Real minibatch size for the outer loss
    #[arg(long)]
    pub real_batch: Option<usize>,
    /// Synthetic objects per inner step (even; half per class)
    #[arg(long)]
    pub synthetic_batch: Option<usize>,
    /// Initial value of every synthetic learning rate
    #[arg(long)]
    pub lr_init: Option<f64>,
    /// Outer optimizer step size
    #[arg(long)]
    pub outer_lr: Option<f64>,
}

pub fn resolve(global: &GlobalArgs, args: &DistillArgs) -> Result<Resolved> {
    let mut r = Resolved::new("distill");
    r.string("distill.train", "out/train.csv");
    r.string("distill.archs", "2layer");
    r.int("distill.inner_models", 3);
    r.int("distill.inner_steps", 40);
    r.int("distill.inner_epochs", 5);
    r.int("distill.outer_epochs", 50);
    r.int("distill.real_batch", 64);
    r.int("distill.synthetic_batch", 8);
    r.float("distill.lr_init", 0.01);
    r.float("distill.outer_lr", 0.01);
    r.float("distill.beta1", 0.9);
    r.float("distill.beta2", 0.999);
    r.float("distill.epsilon", 1e-8);
    apply_global(&mut r, global)?;
    r.flag_str("distill.train", args.train.as_deref());
    r.flag_str("distill.archs", args.archs.as_deref());
    r.flag_usize("distill.inner_models", args.inner_models);
    r.flag_usize("distill.inner_steps", args.inner_steps);
    r.flag_usize("distill.inner_epochs", args.inner_epochs);
    r.flag_usize("distill.outer_epochs", args.outer_epochs);
    r.flag_usize("distill.real_batch", args.real_batch);
    r.flag_usize("distill.synthetic_batch", args.synthetic_batch);
    r.flag_f64("distill.lr_init", args.lr_init);
    r.flag_f64("distill.outer_lr", args.outer_lr);
    Ok(r)
}

/// Builds the engine configuration from resolved `distill.*` keys.
pub fn build_config(r: &Resolved) -> Result<DistillConfig> {
    let archs = parse_arch_list(r.str("distill.archs"))?;
    let m = r.usize("distill.inner_models")?;
    let architectures = if archs.len() == 1 {
        vec![archs[0].clone(); m.max(1)]
    } else if archs.len() == m {
        archs
    } else {
        return Err(Error::InvalidConfig(format!(
            "{} architectures listed but inner_models = {m}; give one architecture \
             to replicate or exactly one per inner model",
            archs.len()
        )));
    };
    let mut cfg = DistillConfig::multi_arch(architectures, r.u64("seed")?);
    cfg.steps_per_epoch = r.usize("distill.inner_steps")?;
    cfg.inner_epochs = r.usize("distill.inner_epochs")?;
    cfg.outer_epochs = r.usize("distill.outer_epochs")?;
    cfg.real_batch_size = r.usize("distill.real_batch")?;
    cfg.synthetic_batch_size = r.usize("distill.synthetic_batch")?;
    cfg.lr_init = r.f64("distill.lr_init");
    cfg.outer_lr = r.f64("distill.outer_lr");
    cfg.beta1 = r.f64("distill.beta1");
    cfg.beta2 = r.f64("distill.beta2");
    cfg.epsilon = r.f64("distill.epsilon");
    Ok(cfg)
}

pub fn execute(r: &Resolved) -> Result<u8> {
    let out = r.prepare_out()?;
    let cfg = build_config(r)?;
    let train = load_dataset(r.str("distill.train"), SplitTag::Train)?;
    let syn = distill::distill(&cfg, &train)?;
    distill::write_json(&syn, &out.join("distilled.json"))?;
    distill::write_csv(&syn, &out.join("distilled.csv"))?;
    distill::write_loss_log(&syn, &out.join("loss_log.csv"))?;

    let meta = syn.metadata();
    let c = &meta.counters;
    let final_loss = match meta.outer_loss_per_epoch.last() {
        Some(l) => format!("{l:.6}"),
        None => "-".into(),
    };
    println!(
        "distilled {} objects ({} steps x {} per batch), replayed over {} inner epochs by {} models",
        syn.steps_per_epoch() * cfg.synthetic_batch_size,
        syn.steps_per_epoch(),
        cfg.synthetic_batch_size,
        syn.inner_epochs(),
        cfg.inner_models(),
    );
    println!("outer steps {} | final outer loss {final_loss}", c.outer_steps);
    println!(
        "forward passes {} | backward tangent passes {} | peak snapshots per model {} | replay passes {}",
        c.inner_forward_passes, c.backward_tangent_passes, c.peak_snapshots_per_model, c.replay_forward_passes,
    );
    Ok(0)
}
