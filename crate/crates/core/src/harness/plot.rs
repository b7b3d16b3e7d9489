//! SVG figures from the CSV artifacts of `run` and `sweep`.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::harness::sweep::EPSILON_CSV;

type Series = (String, Vec<(f64, f64)>);

/// Reads `columns` of a CSV against the column `x`; blank cells are skipped.
fn read_series(path: &Path, x: &str, columns: &[&str]) -> Result<Vec<Series>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("{}: missing column {name}", path.display())))
    };
    let xi = find(x)?;
    let idx: Vec<usize> = columns.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let mut out: Vec<Series> = columns.iter().map(|c| (c.to_string(), Vec::new())).collect();
    for rec in r.records() {
        let rec = rec?;
        let Ok(xv) = rec[xi].parse::<f64>() else { continue };
        for (k, &ci) in idx.iter().enumerate() {
            if let Ok(v) = rec[ci].parse::<f64>() {
                if v.is_finite() {
                    out[k].1.push((xv, v));
                }
            }
        }
    }
    out.retain(|(_, pts)| !pts.is_empty());
    Ok(out)
}

fn plot_error(e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("plotting failed: {e}"))
}

fn line_chart(out: &Path, title: &str, x_label: &str, series: &[Series]) -> Result<()> {
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = if y1 > y0 { 0.05 * (y1 - y0) } else { 0.5 };
    let root = SVGBackend::new(out, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
        .map_err(plot_error)?;
    chart.configure_mesh().x_desc(x_label).draw().map_err(plot_error)?;
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_error)?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 2, color.filled())))
            .map_err(plot_error)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_error)?;
    root.present().map_err(plot_error)?;
    Ok(())
}

fn is_convergence_csv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "csv")
        && p.file_stem()
            .and_then(|s| s.to_str())
            .is_some_and(|s| s.starts_with("convergence"))
}

/// Renders every convergence CSV in `dir` and the ε-vs-κ table if present.
/// Returns the SVG paths written.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut inputs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_convergence_csv(p))
        .collect();
    inputs.sort();
    let eps = dir.join(EPSILON_CSV);
    if inputs.is_empty() && !eps.exists() {
        return Err(Error::InvalidArgument(format!(
            "{}: no convergence or {EPSILON_CSV} tables to plot",
            dir.display()
        )));
    }
    let mut written = Vec::new();
    for csv_path in &inputs {
        let series = read_series(csv_path, "iteration", &["mean_return_per_agent", "nash_gap", "potential_estimate"])?;
        let out = csv_path.with_extension("svg");
        let title = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("convergence");
        line_chart(&out, title, "iteration", &series)?;
        written.push(out);
    }
    if eps.exists() {
        let series = read_series(&eps, "kappa", &["relative_error_pct", "theoretical_bound"])?;
        let out = eps.with_extension("svg");
        line_chart(&out, "terminal return gap vs truncation radius", "kappa", &series)?;
        written.push(out);
    }
    Ok(written)
}
