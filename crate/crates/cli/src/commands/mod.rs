//! One module per subcommand plus the helpers they share.

pub mod datagen;
pub mod distill;
pub mod eval;
pub mod plot;
pub mod schedule;
pub mod sweep;
pub mod train;

use crate::config::Resolved;
use crate::GlobalArgs;
use std::path::Path;
use tabdistill::data::{self, Dataset, SplitTag};
use tabdistill::net::ArchSpec;
use tabdistill::schedule::StrategyChoice;
use tabdistill::{Error, Result};

/// Applies the non-default layers in precedence order: config file, then
/// environment, then the shared global flags. Subcommand flags are applied
/// by the caller afterwards, so they sit on the same (highest) tier.
pub fn apply_global(r: &mut Resolved, g: &GlobalArgs) -> Result<()> {
    if let Some(path) = &g.config {
        r.load_file(path)?;
    }
    r.load_env()?;
    r.flag_str("out", g.out.as_deref());
    r.flag_int("seed", g.seed);
    r.flag_usize("jobs", g.jobs);
    r.flag_true("strict_serial", g.strict_serial);
    Ok(())
}

pub fn load_dataset(path: &str, tag: SplitTag) -> Result<Dataset> {
    data::read_csv(Path::new(path), tag)
        .map_err(|e| Error::InvalidConfig(format!("cannot load {tag} data from {path}: {e}")))
}

pub fn parse_arch(s: &str) -> Result<ArchSpec> {
    s.trim().parse()
}

/// Parses a comma-separated architecture list such as `1layer,2-16-2:tanh`.
pub fn parse_arch_list(s: &str) -> Result<Vec<ArchSpec>> {
    let archs: Vec<ArchSpec> = s
        .split(',')
        .filter(|tok| !tok.trim().is_empty())
        .map(parse_arch)
        .collect::<Result<_>>()?;
    if archs.is_empty() {
        return Err(Error::InvalidConfig(format!("no architectures in `{s}`")));
    }
    Ok(archs)
}

/// Builds one replay strategy from the `{prefix}.*` parameter keys.
pub fn strategy_from_name(r: &Resolved, prefix: &str, name: &str) -> Result<StrategyChoice> {
    let key = |suffix: &str| format!("{prefix}.{suffix}");
    Ok(match name.trim() {
        "raw" => StrategyChoice::Raw,
        "s1" | "strategy1" => StrategyChoice::Strategy1 {
            total_epochs: r.usize(&key("total_epochs"))?,
            base_lr: r.f64(&key("base_lr")),
            warm_epochs: r.usize(&key("warm_epochs"))?,
        },
        "s2" | "strategy2" => StrategyChoice::Strategy2 {
            repetitions: r.usize(&key("s2_reps"))?,
            decay: r.f64(&key("decay")),
        },
        "s3" | "strategy3" => StrategyChoice::Strategy3 {
            repetitions: r.usize(&key("s3_reps"))?,
            decay: r.f64(&key("decay")),
        },
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown strategy `{other}` (expected raw, s1, s2, or s3)"
            )))
        }
    })
}

/// Declares the strategy parameter keys shared by schedule/train/eval/sweep.
pub fn declare_strategy_keys(r: &mut Resolved, prefix: &str) {
    r.int(&format!("{prefix}.total_epochs"), 50);
    r.float(&format!("{prefix}.base_lr"), 0.01);
    r.int(&format!("{prefix}.warm_epochs"), 10);
    r.float(&format!("{prefix}.decay"), 0.98);
    r.int(&format!("{prefix}.s2_reps"), 10);
    r.int(&format!("{prefix}.s3_reps"), 45);
}

/// Grid bounds covering a dataset's bounding box with 10% padding per side.
pub fn grid_bounds(data: &Dataset) -> (f64, f64, f64, f64) {
    let features = data.features();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for r in 0..features.rows() {
        for c in 0..2 {
            lo[c] = lo[c].min(features.get(r, c));
            hi[c] = hi[c].max(features.get(r, c));
        }
    }
    let pad = |lo: f64, hi: f64| {
        let span = if hi > lo { hi - lo } else { 1.0 };
        (lo - 0.1 * span, hi + 0.1 * span)
    };
    let (x1min, x1max) = pad(lo[0], hi[0]);
    let (x2min, x2max) = pad(lo[1], hi[1]);
    (x1min, x1max, x2min, x2max)
}

/// Turns a cell or source name into a safe file stem.
pub fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

/// Splits one CSV line; the formats here never quote or escape commas.
pub fn csv_fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

pub fn parse_field_f64(tok: &str, path: &Path, line_no: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| {
        Error::InvalidConfig(format!(
            "{} line {line_no}: `{tok}` is not a number",
            path.display()
        ))
    })
}

/// Reads a CSV with the exact expected header, returning data lines.
pub fn read_csv_lines(path: &Path, expected_header: &str) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == expected_header => {}
        other => {
            return Err(Error::InvalidConfig(format!(
                "{} must start with header `{expected_header}`, got {:?}",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    Ok(lines
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}
