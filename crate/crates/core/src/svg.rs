//! Write-only SVG renderings of cells and of the log-log area distribution.

use std::fmt::Write;

use crate::analysis::AreaHistogram;
use crate::voronoi::CellSet;

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
];

/// Cells filled by scale label (or uniformly when labels are absent), y axis up.
pub fn cells_svg(cells: &CellSet, labels: Option<&[usize]>) -> String {
    let width_px = 800.0;
    let scale = width_px / cells.domain.width;
    let height_px = cells.domain.height * scale;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{height_px:.3}" viewBox="0 0 {width_px} {height_px:.3}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for cell in &cells.cells {
        let fill = labels
            .and_then(|l| l.get(cell.site_index))
            .map(|&l| PALETTE[l % PALETTE.len()])
            .unwrap_or("#d0d7e1");
        let pts: Vec<String> = cell
            .vertices
            .iter()
            .map(|v| format!("{:.3},{:.3}", v.x * scale, height_px - v.y * scale))
            .collect();
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{fill}" fill-opacity="0.55" stroke="black" stroke-width="0.4"/>"#,
            pts.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Log-log chart of the empirical number density (dots), a model curve
/// (solid) and a target line (dashed).
pub fn distribution_svg(
    hist: &AreaHistogram,
    model: Option<&dyn Fn(f64) -> f64>,
    target: Option<(f64, f64)>,
) -> String {
    let (w, h, margin) = (640.0, 480.0, 60.0);
    let centers = hist.bin_centers();
    let points: Vec<(f64, f64)> = centers
        .iter()
        .zip(&hist.densities)
        .filter(|(_, d)| **d > 0.0)
        .map(|(c, d)| (c.log10(), d.log10()))
        .collect();
    let x_lo = hist.bin_edges[0].log10();
    let x_hi = hist.bin_edges[hist.bin_edges.len() - 1].log10();
    let (mut y_lo, mut y_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (-1.0, 1.0);
    }
    y_lo = y_lo.floor();
    y_hi = y_hi.ceil().max(y_lo + 1.0);
    let px = |x: f64| margin + (x - x_lo) / (x_hi - x_lo) * (w - 2.0 * margin);
    let py = |y: f64| h - margin - (y - y_lo) / (y_hi - y_lo) * (h - 2.0 * margin);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * margin,
        h - 2.0 * margin
    );
    for decade in (x_lo.ceil() as i32)..=(x_hi.floor() as i32) {
        let x = px(decade as f64);
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{decade}</text>"#,
            h - margin + 18.0
        );
    }
    for decade in (y_lo as i32)..=(y_hi as i32) {
        let y = py(decade as f64);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" text-anchor="end">1e{decade}</text>"#,
            margin - 6.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">cell area</text>"#,
        w / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">number density</text>"#,
        h / 2.0,
        h / 2.0
    );

    let curve = |f: &dyn Fn(f64) -> f64| -> String {
        (0..=200)
            .filter_map(|i| {
                let x = x_lo + (x_hi - x_lo) * i as f64 / 200.0;
                let v = f(10f64.powf(x));
                (v > 0.0).then(|| (x, v.log10()))
            })
            .filter(|(_, y)| *y >= y_lo && *y <= y_hi)
            .map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    if let Some(f) = model {
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            curve(f),
            PALETTE[0]
        );
    }
    if let Some((log_amplitude, m)) = target {
        let line = move |y: f64| (log_amplitude - m * y.ln()).exp();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5" stroke-dasharray="6 4"/>"#,
            curve(&line),
            PALETTE[2]
        );
    }
    for (x, y) in &points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#,
            px(*x),
            py(*y)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::histogram;
    use crate::geometry::{Point, Rect};
    use crate::voronoi::tessellate_sites;

    #[test]
    fn renders_every_cell() {
        let cells = tessellate_sites(
            &[Point::new(0.2, 0.2), Point::new(0.7, 0.6)],
            Rect::new(1.0, 1.0),
        )
        .unwrap();
        let svg = cells_svg(&cells, Some(&[0, 1]));
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn plot_has_points_and_lines() {
        let h = histogram(&[0.5, 0.6, 1.0, 2.0], 4.0, 5, (0.1, 10.0)).unwrap();
        let model = |y: f64| 1.0 / y;
        let svg = distribution_svg(&h, Some(&model), Some((0.0, 1.75)));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
