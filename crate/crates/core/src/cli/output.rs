//! Artifact writers: CSV tables, JSON documents and SVG line plots.
//!
//! Numbers are formatted by a fixed rule so identical runs produce identical
//! bytes.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest round-trip formatting, switching to exponent form outside
/// `[1e-4, 1e6)`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Output directory plus the list of files written into it, in order.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn record(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.record(name);
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.record(name);
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::InvalidArgument(format!("cannot serialize {name}: {e}")))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Writes an SVG with one polyline per series. Non-finite points are
    /// dropped.
    pub fn line_plot(&mut self, name: &str, plot: &LinePlot<'_>) -> Result<()> {
        let path = self.record(name);
        draw(&path, plot).map_err(|e| Error::InvalidArgument(format!("plot {name}: {e}")))
    }
}

pub struct LinePlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<(&'a str, Vec<(f64, f64)>)>,
}

const PALETTE: [RGBColor; 4] = [BLUE, RED, GREEN, MAGENTA];

fn draw(path: &Path, plot: &LinePlot<'_>) -> std::result::Result<(), Box<dyn std::error::Error>> {
    let series: Vec<(&str, Vec<(f64, f64)>)> = plot
        .series
        .iter()
        .map(|(n, pts)| (*n, pts.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect()))
        .collect();
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    if all.is_empty() {
        return Err("no finite points".into());
    }
    let range = |f: fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
        (lo - pad)..(hi + pad)
    };
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(plot.title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(range(|p| p.0), range(|p| p.1))?;
    chart
        .configure_mesh()
        .x_desc(plot.x_label)
        .y_desc(plot.y_label)
        .draw()?;
    for (k, (label, pts)) in series.into_iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))?
            .label(label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}
