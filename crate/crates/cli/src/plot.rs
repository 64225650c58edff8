//! SVG figures: 2-D embedding projections and training curves.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Correct,
    Incorrect,
    Reference,
    /// Clinically scored samples without a binary label.
    Scored,
}

#[derive(Debug, Clone)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub group: String,
    pub marker: Marker,
}

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Plot(e.to_string())
}

fn padded(values: impl Iterator<Item = f64> + Clone) -> std::ops::Range<f64> {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return 0.0..1.0;
    }
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (lo - pad)..(hi + pad)
}

fn save(svg: String, out: &Path) -> CliResult<()> {
    rehab_contrast::model::write_atomic(out, svg.as_bytes())?;
    Ok(())
}

/// One colour per group; filled circles are correct samples, crosses
/// incorrect ones, large triangles the references.
pub fn scatter(points: &[Point], title: &str, out: &Path) -> CliResult<()> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (900, 720)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 22))
            .margin(16)
            .x_label_area_size(32)
            .y_label_area_size(48)
            .build_cartesian_2d(
                padded(points.iter().map(|p| p.x)),
                padded(points.iter().map(|p| p.y)),
            )
            .map_err(plot_err)?;
        chart.configure_mesh().disable_mesh().draw().map_err(plot_err)?;

        let mut groups: BTreeMap<&str, Vec<&Point>> = BTreeMap::new();
        for p in points {
            groups.entry(p.group.as_str()).or_default().push(p);
        }
        for (i, (group, members)) in groups.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let pick = |m: Marker| members.iter().filter(move |p| p.marker == m).map(|p| (p.x, p.y));
            chart
                .draw_series(pick(Marker::Correct).chain(pick(Marker::Scored)).map(|c| Circle::new(c, 4, color.filled())))
                .map_err(plot_err)?
                .label(*group)
                .legend(move |(x, y)| Circle::new((x + 10, y), 5, color.filled()));
            chart
                .draw_series(pick(Marker::Incorrect).map(|c| Cross::new(c, 5, color.stroke_width(2))))
                .map_err(plot_err)?;
            chart
                .draw_series(pick(Marker::Reference).map(|c| TriangleMarker::new(c, 11, color.filled())))
                .map_err(plot_err)?;
            chart
                .draw_series(pick(Marker::Reference).map(|c| TriangleMarker::new(c, 11, BLACK.stroke_width(1))))
                .map_err(plot_err)?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    save(svg, out)
}

/// Line chart of named `(epoch, value)` series.
pub fn curves(series: &[(String, Vec<(f64, f64)>)], title: &str, y_desc: &str, out: &Path) -> CliResult<()> {
    let all = || series.iter().flat_map(|(_, s)| s.iter());
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (900, 540)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 22))
            .margin(16)
            .x_label_area_size(36)
            .y_label_area_size(60)
            .build_cartesian_2d(padded(all().map(|p| p.0)), padded(all().map(|p| p.1)))
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("epoch")
            .y_desc(y_desc)
            .draw()
            .map_err(plot_err)?;
        for (i, (name, points)) in series.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            chart
                .draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(name.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        }
        if series.len() > 1 {
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.85))
                .border_style(BLACK)
                .draw()
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    save(svg, out)
}
