//! `tabdistill datagen` — generate, split, and standardize the moons dataset.

use super::apply_global;
use crate::config::Resolved;
use crate::GlobalArgs;
use clap::Args;
use tabdistill::{data, seed, Result};

#[derive(Args)]
pub struct DatagenArgs {
    /// Total number of points, split evenly between the two classes
    #[arg(long)]
    pub n_total: Option<usize>,
    /// Standard deviation of the isotropic coordinate noise
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Fraction of rows assigned to the training split
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

pub fn resolve(global: &GlobalArgs, args: &DatagenArgs) -> Result<Resolved> {
    let mut r = Resolved::new("datagen");
    r.int("datagen.n_total", 1500);
    r.float("datagen.noise_std", 0.15);
    r.float("datagen.train_fraction", 2.0 / 3.0);
    apply_global(&mut r, global)?;
    r.flag_usize("datagen.n_total", args.n_total);
    r.flag_f64("datagen.noise_std", args.noise_std);
    r.flag_f64("datagen.train_fraction", args.train_fraction);
    Ok(r)
}

pub fn execute(r: &Resolved) -> Result<u8> {
    let out = r.prepare_out()?;
    let master = r.u64("seed")?;
    let full = data::generate_moons(
        r.usize("datagen.n_total")?,
        r.f64("datagen.noise_std"),
        seed::derive(master, "datagen-moons", &[]),
    )?;
    let (train, test) = data::split(
        &full,
        r.f64("datagen.train_fraction"),
        seed::derive(master, "datagen-split", &[]),
    )?;
    let (train, test) = data::standardize(&train, &test)?;
    data::write_csv(&full, &out.join("full.csv"))?;
    data::write_csv(&train, &out.join("train.csv"))?;
    data::write_csv(&test, &out.join("test.csv"))?;
    // The train split's provenance carries the generator parameters, both
    // seeds, and the standardization constants fitted on it.
    data::write_provenance(&train, &out.join("provenance.json"))?;
    println!(
        "wrote {} full / {} train / {} test rows to {}",
        full.len(),
        train.len(),
        test.len(),
        out.display()
    );
    Ok(0)
}
