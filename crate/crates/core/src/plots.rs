//! SVG figures for `report`: the distribution of sampled objectives against
//! the returned plan, and the surrogate objective per training iteration.

use std::path::Path;

use plotters::prelude::*;

use crate::cli::ReportRow;
use crate::sampler::Dataset;
use crate::{Error, Result};

const SIZE: (u32, u32) = (720, 420);
const HIST_BINS: usize = 30;

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Format(format!("plot: {e}"))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let pad = ((hi - lo) * 0.05).max(1e-9 * hi.abs().max(1.0));
    (lo - pad, hi + pad)
}

/// Writes `<run>_objectives.svg` and `<run>_iterations.svg` into `dir`.
pub fn write_run_plots(dir: &Path, row: &ReportRow, data: &Dataset, iteration_z: &[Option<f64>]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    histogram(&dir.join(format!("{}_objectives.svg", row.run)), row, &data.values)?;
    iterations(&dir.join(format!("{}_iterations.svg", row.run)), row, iteration_z)
}

fn histogram(path: &Path, row: &ReportRow, values: &[f64]) -> Result<()> {
    let mut marks = vec![(row.obj, RED, "returned plan"), (row.min_sample, BLUE, "Min(sample)")];
    if let Some(opt) = row.opt {
        marks.push((opt, GREEN, "Opt"));
    }
    let lo = values.iter().chain(marks.iter().map(|m| &m.0)).copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().chain(marks.iter().map(|m| &m.0)).copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = padded(lo, hi);
    let width = (hi - lo) / HIST_BINS as f64;
    let mut counts = vec![0usize; HIST_BINS];
    for &v in values {
        counts[(((v - lo) / width) as usize).min(HIST_BINS - 1)] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(1) as f64 * 1.1;

    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{}: sampled objectives (N = {})", row.run, values.len()), ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(48)
        .build_cartesian_2d(lo..hi, 0.0..top)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("objective").y_desc("samples").draw().map_err(plot_err)?;
    chart
        .draw_series(counts.iter().enumerate().map(|(k, &c)| {
            let x0 = lo + k as f64 * width;
            Rectangle::new([(x0, 0.0), (x0 + width, c as f64)], BLACK.mix(0.25).filled())
        }))
        .map_err(plot_err)?;
    for (x, colour, label) in marks {
        chart
            .draw_series(LineSeries::new([(x, 0.0), (x, top)], colour.stroke_width(2)))
            .map_err(plot_err)?
            .label(label)
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], colour.stroke_width(2)));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)
}

fn iterations(path: &Path, row: &ReportRow, zs: &[Option<f64>]) -> Result<()> {
    let points: Vec<(f64, f64)> = zs.iter().enumerate().filter_map(|(k, z)| z.map(|z| (k as f64 + 1.0, z))).collect();
    let lo = points.iter().map(|p| p.1).chain([row.min_sample]).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.1).chain([row.min_sample]).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = padded(lo, hi);
    let last = zs.len().max(1) as f64 + 0.5;

    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{}: surrogate plans by iteration", row.run), ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(60)
        .build_cartesian_2d(0.5..last, lo..hi)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("iteration").y_desc("objective").draw().map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(points.clone(), RED.stroke_width(2)))
        .map_err(plot_err)?
        .label("surrogate plan")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], RED.stroke_width(2)));
    chart.draw_series(points.iter().map(|&p| Circle::new(p, 3, RED.filled()))).map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new([(0.5, row.min_sample), (last, row.min_sample)], BLUE))
        .map_err(plot_err)?
        .label("Min(sample)")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], BLUE));
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)
}
