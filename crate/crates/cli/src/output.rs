use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use vortex_census::scaling::ScalingFit;

use crate::failure::{Failure, Outcome};

pub fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Outcome {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
        .map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

/// `12.5 → "0012.500"`: fixed width so file names sort by time.
pub fn time_tag(t: f64) -> String {
    format!("{t:08.3}")
}

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 44.0;

/// Log–log scatter of each fit's points with its regression line, one
/// panel per fit, side by side.
pub fn scaling_svg(fits: &[&ScalingFit]) -> String {
    let width = PANEL_W * fits.len().max(1) as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{PANEL_H}" fill="white"/>"#);
    for (i, fit) in fits.iter().enumerate() {
        panel(&mut svg, fit, i as f64 * PANEL_W);
    }
    svg.push_str("</svg>\n");
    svg
}

fn panel(svg: &mut String, fit: &ScalingFit, x0: f64) {
    let xs: Vec<f64> = fit.points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = fit.points.iter().map(|p| p.1.ln()).collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo) * 0.05).max(1e-9);
        (lo - pad, hi + pad)
    };
    let (xl, xh) = range(&xs);
    let (yl, yh) = range(&ys);
    let px = |x: f64| x0 + MARGIN + (x - xl) / (xh - xl) * (PANEL_W - 1.5 * MARGIN);
    let py = |y: f64| PANEL_H - MARGIN - (y - yl) / (yh - yl) * (PANEL_H - 1.5 * MARGIN);

    let _ = writeln!(
        svg,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        x0 + MARGIN,
        MARGIN / 2.0,
        PANEL_W - 1.5 * MARGIN,
        PANEL_H - 1.5 * MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="14">{}: slope {:.3} ± {:.3}, R² {:.3}</text>"#,
        x0 + MARGIN,
        fit.statistic,
        fit.slope,
        fit.slope_se,
        fit.r2
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}">log t</text>"#,
        x0 + PANEL_W / 2.0,
        PANEL_H - 10.0
    );
    for (x, y) in xs.iter().zip(&ys) {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"/>"#,
            px(*x),
            py(*y)
        );
    }
    let line = |x: f64| fit.intercept + fit.slope * x;
    let _ = writeln!(
        svg,
        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="firebrick"/>"#,
        px(xl),
        py(line(xl)),
        px(xh),
        py(line(xh))
    );
}
