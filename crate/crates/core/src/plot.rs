//! Minimal self-contained SVG renderings of datasets, decision grids,
//! convergence curves, and learning-rate schedules.
//!
//! These are conveniences for eyeballing results without a plotting stack;
//! the CSV exports remain the canonical data. Output is a pure function of
//! the inputs (no timestamps, no randomness), so rendered files are
//! byte-stable across reruns.

use crate::data::Dataset;
use crate::eval::DecisionGrid;
use crate::schedule::TrainingSchedule;
use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

const CLASS_COLORS: [&str; 2] = ["#1f77b4", "#d62728"];
const SERIES_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Maps data coordinates into the drawing area (y axis flipped).
struct Frame {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        // Guard against degenerate spans so division stays finite.
        let pad = |lo: f64, hi: f64| {
            if hi - lo > 1e-12 {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (xmin, xmax) = pad(xmin, xmax);
        let (ymin, ymax) = pad(ymin, ymax);
        Self {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.xmin) / (self.xmax - self.xmin) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.ymin) / (self.ymax - self.ymin) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg_open(out: &mut String) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        "<rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{h}\" fill=\"none\" \
         stroke=\"#333\" stroke-width=\"1\"/>",
        m = MARGIN,
        w = WIDTH - 2.0 * MARGIN,
        h = HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>",
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 14 {:.1})\">{y_label}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for v in [frame.xmin, frame.xmax] {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{v:.3}</text>",
            frame.x(v),
            HEIGHT - MARGIN + 16.0
        );
    }
    for v in [frame.ymin, frame.ymax] {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{v:.3}</text>",
            MARGIN - 6.0,
            frame.y(v) + 4.0
        );
    }
}

fn data_bounds(data: &Dataset) -> (f64, f64, f64, f64) {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for r in 0..data.len() {
        let row = data.features().row(r);
        xmin = xmin.min(row[0]);
        xmax = xmax.max(row[0]);
        ymin = ymin.min(row[1]);
        ymax = ymax.max(row[1]);
    }
    let dx = (xmax - xmin).max(1e-9) * 0.05;
    let dy = (ymax - ymin).max(1e-9) * 0.05;
    (xmin - dx, xmax + dx, ymin - dy, ymax + dy)
}

fn scatter_points(out: &mut String, frame: &Frame, data: &Dataset, radius: f64) {
    for r in 0..data.len() {
        let row = data.features().row(r);
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius}\" fill=\"{}\" \
             fill-opacity=\"0.8\"/>",
            frame.x(row[0]),
            frame.y(row[1]),
            CLASS_COLORS[data.labels()[r].min(1)]
        );
    }
}

/// Scatter plot of a 2D dataset, one color per class.
pub fn scatter_svg(data: &Dataset) -> String {
    let (xmin, xmax, ymin, ymax) = data_bounds(data);
    let frame = Frame::new(xmin, xmax, ymin, ymax);
    let mut out = String::new();
    svg_open(&mut out);
    scatter_points(&mut out, &frame, data, 3.0);
    axes(&mut out, &frame, "x1", "x2");
    out.push_str("</svg>\n");
    out
}

/// Decision-boundary heat map (class-1 probability), optionally with a
/// dataset scattered on top.
pub fn boundary_svg(grid: &DecisionGrid, overlay: Option<&Dataset>) -> String {
    let frame = Frame::new(
        grid.x1_range.0,
        grid.x1_range.1,
        grid.x2_range.0,
        grid.x2_range.1,
    );
    let mut out = String::new();
    svg_open(&mut out);
    let res = grid.resolution;
    let cell_w = (WIDTH - 2.0 * MARGIN) / res as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / res as f64;
    for j in 0..res {
        for i in 0..res {
            let p = grid.prob1_at(i, j);
            // Blend class-0 blue toward class-1 red through white.
            let (r, g, b) = if p < 0.5 {
                let t = p * 2.0;
                (
                    (0x1f as f64 + (255.0 - 0x1f as f64) * t) as u8,
                    (0x77 as f64 + (255.0 - 0x77 as f64) * t) as u8,
                    (0xb4 as f64 + (255.0 - 0xb4 as f64) * t) as u8,
                )
            } else {
                let t = (1.0 - p) * 2.0;
                (
                    (0xd6 as f64 + (255.0 - 0xd6 as f64) * t) as u8,
                    (0x27 as f64 + (255.0 - 0x27 as f64) * t) as u8,
                    (0x28 as f64 + (255.0 - 0x28 as f64) * t) as u8,
                )
            };
            let x = MARGIN + i as f64 * cell_w;
            let y = HEIGHT - MARGIN - (j + 1) as f64 * cell_h;
            let _ = writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                 fill=\"rgb({r},{g},{b})\"/>",
                cell_w + 0.5,
                cell_h + 0.5
            );
        }
    }
    if let Some(data) = overlay {
        scatter_points(&mut out, &frame, data, 2.5);
    }
    axes(&mut out, &frame, "x1", "x2");
    out.push_str("</svg>\n");
    out
}

/// Line plot of one or more per-epoch series sharing an x axis.
pub fn curves_svg(series: &[(String, Vec<f64>)], y_label: &str) -> String {
    let max_len = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, values) in series {
        for &v in values {
            ymin = ymin.min(v);
            ymax = ymax.max(v);
        }
    }
    if !ymin.is_finite() {
        ymin = 0.0;
        ymax = 1.0;
    }
    let frame = Frame::new(0.0, max_len.saturating_sub(1).max(1) as f64, ymin, ymax);
    let mut out = String::new();
    svg_open(&mut out);
    for (si, (label, values)) in series.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        let mut path = String::new();
        for (i, &v) in values.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.2} {:.2} ", frame.x(i as f64), frame.y(v));
        }
        let _ = writeln!(
            out,
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            path.trim_end()
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"{color}\">{label}</text>",
            MARGIN + 8.0,
            MARGIN + 16.0 + 14.0 * si as f64
        );
    }
    axes(&mut out, &frame, "epoch", y_label);
    out.push_str("</svg>\n");
    out
}

/// Step plot of a schedule's learning rate over global steps.
pub fn schedule_svg(sched: &TrainingSchedule) -> String {
    let series = vec![(format!("{}", sched.strategy()), sched.lrs())];
    let mut svg = curves_svg(&series, "learning rate");
    // The x axis counts steps, not epochs, for schedules.
    svg = svg.replace(">epoch<", ">global step<");
    svg
}
