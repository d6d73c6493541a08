//! `tabdistill plot-export` — re-render CSV artifacts as standalone SVGs.

use super::{apply_global, csv_fields, parse_field_f64, read_csv_lines};
use crate::config::Resolved;
use crate::GlobalArgs;
use clap::Args;
use std::path::Path;
use tabdistill::data::{self, SplitTag};
use tabdistill::eval::DecisionGrid;
use tabdistill::plot::{boundary_svg, curves_svg, scatter_svg};
use tabdistill::{Error, Result};

#[derive(Args)]
pub struct PlotArgs {
    /// What to render: scatter, boundary, curves, schedule, or loss
    #[arg(long)]
    pub kind: Option<String>,
    /// Input CSV (dataset, grid, curves, schedule, or loss log)
    #[arg(long)]
    pub input: Option<String>,
    /// Dataset CSV scattered over a boundary plot (empty = none)
    #[arg(long)]
    pub overlay: Option<String>,
    /// Output SVG file name, relative to the output directory
    #[arg(long)]
    pub output: Option<String>,
}

pub fn resolve(global: &GlobalArgs, args: &PlotArgs) -> Result<Resolved> {
    let mut r = Resolved::new("plot-export");
    r.string("plot.kind", "scatter");
    r.string("plot.input", "out/train.csv");
    r.string("plot.overlay", "");
    r.string("plot.output", "plot.svg");
    apply_global(&mut r, global)?;
    r.flag_str("plot.kind", args.kind.as_deref());
    r.flag_str("plot.input", args.input.as_deref());
    r.flag_str("plot.overlay", args.overlay.as_deref());
    r.flag_str("plot.output", args.output.as_deref());
    Ok(r)
}

/// Rebuilds a grid from its `x1,x2,class,prob1` CSV (row-major, x1 fastest).
fn read_grid_csv(path: &Path) -> Result<DecisionGrid> {
    let lines = read_csv_lines(path, "x1,x2,class,prob1")?;
    let n = lines.len();
    let resolution = (n as f64).sqrt().round() as usize;
    if resolution < 2 || resolution * resolution != n {
        return Err(Error::InvalidConfig(format!(
            "{} has {n} grid rows, which is not a square of at least 2x2",
            path.display()
        )));
    }
    let mut classes = Vec::with_capacity(n);
    let mut prob1 = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for (i, line) in lines.iter().enumerate() {
        let f = csv_fields(line);
        if f.len() != 4 {
            return Err(Error::InvalidConfig(format!(
                "{} line {}: expected 4 fields, got {}",
                path.display(),
                i + 2,
                f.len()
            )));
        }
        points.push((
            parse_field_f64(f[0], path, i + 2)?,
            parse_field_f64(f[1], path, i + 2)?,
        ));
        classes.push(f[2].parse::<usize>().map_err(|_| {
            Error::InvalidConfig(format!("{} line {}: bad class `{}`", path.display(), i + 2, f[2]))
        })?);
        prob1.push(parse_field_f64(f[3], path, i + 2)?);
    }
    let x1_range = (points[0].0, points[resolution - 1].0);
    let x2_range = (points[0].1, points[n - 1].1);
    // `lo < hi` is false for NaN inputs, so those are rejected here too.
    let increasing = |lo: f64, hi: f64| lo < hi;
    if !increasing(x1_range.0, x1_range.1) || !increasing(x2_range.0, x2_range.1) {
        return Err(Error::InvalidConfig(format!(
            "{} does not cover a non-degenerate grid",
            path.display()
        )));
    }
    Ok(DecisionGrid { x1_range, x2_range, resolution, classes, prob1 })
}

/// Accuracy series from either a single-run curves CSV or a per-restart one.
fn read_curves_csv(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    let header = text.lines().next().unwrap_or("").trim();
    match header {
        "epoch,accuracy,logloss" => {
            let accs = read_column(path, header, 1)?;
            Ok(vec![("accuracy".into(), accs)])
        }
        "restart_seed,epoch,accuracy,logloss" => {
            let mut series: Vec<(String, Vec<f64>)> = Vec::new();
            for (i, line) in read_csv_lines(path, header)?.iter().enumerate() {
                let f = csv_fields(line);
                if f.len() != 4 {
                    return Err(Error::InvalidConfig(format!(
                        "{} line {}: expected 4 fields",
                        path.display(),
                        i + 2
                    )));
                }
                let label = format!("seed {}", f[0]);
                let acc = parse_field_f64(f[2], path, i + 2)?;
                match series.iter_mut().find(|(l, _)| *l == label) {
                    Some((_, vals)) => vals.push(acc),
                    None => series.push((label, vec![acc])),
                }
            }
            Ok(series)
        }
        other => Err(Error::InvalidConfig(format!(
            "{} is not a curves CSV (header `{other}`)",
            path.display()
        ))),
    }
}

/// One numeric column from a CSV with the given exact header.
fn read_column(path: &Path, header: &str, col: usize) -> Result<Vec<f64>> {
    read_csv_lines(path, header)?
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let f = csv_fields(line);
            let tok = f.get(col).ok_or_else(|| {
                Error::InvalidConfig(format!("{} line {}: missing column {col}", path.display(), i + 2))
            })?;
            parse_field_f64(tok, path, i + 2)
        })
        .collect()
}

pub fn execute(r: &Resolved) -> Result<u8> {
    let out = r.prepare_out()?;
    let input = Path::new(r.str("plot.input"));
    let kind = r.str("plot.kind");
    let svg = match kind {
        "scatter" => scatter_svg(&data::read_csv(input, SplitTag::Full)?),
        "boundary" => {
            let grid = read_grid_csv(input)?;
            let overlay = match r.str("plot.overlay") {
                "" => None,
                path => Some(data::read_csv(Path::new(path), SplitTag::Full)?),
            };
            boundary_svg(&grid, overlay.as_ref())
        }
        "curves" => curves_svg(&read_curves_csv(input)?, "accuracy"),
        "schedule" => {
            let lrs = read_column(input, "global_step,epoch,batch_index,lr", 3)?;
            // The x axis counts schedule steps, not epochs.
            curves_svg(&[("schedule".into(), lrs)], "learning rate")
                .replace(">epoch<", ">global step<")
        }
        "loss" => {
            let losses = read_column(input, "outer_epoch,mean_loss", 1)?;
            curves_svg(&[("outer loss".into(), losses)], "mean outer loss")
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown plot kind `{other}` (expected scatter, boundary, curves, schedule, or loss)"
            )))
        }
    };
    let target = out.join(r.str("plot.output"));
    std::fs::write(&target, svg)?;
    println!("rendered {kind} from {} to {}", input.display(), target.display());
    Ok(0)
}
