//! Static step plot of a risk-coverage curve.

use std::fmt::Write;

use fdshift_core::metrics::RiskCoverageCurve;

const WIDTH: f64 = 420.0;
const HEIGHT: f64 = 320.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

fn x(coverage: f64) -> f64 {
    LEFT + coverage.clamp(0.0, 1.0) * (WIDTH - LEFT - RIGHT)
}

fn y(risk: f64) -> f64 {
    HEIGHT - BOTTOM - risk.clamp(0.0, 1.0) * (HEIGHT - TOP - BOTTOM)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Risk is held constant until the next curve point, then drops or rises.
pub fn step_points(curve: &RiskCoverageCurve) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(2 * curve.len());
    for i in 0..curve.len() {
        pts.push((curve.coverages[i], curve.risks[i]));
        if i + 1 < curve.len() {
            pts.push((curve.coverages[i + 1], curve.risks[i]));
        }
    }
    pts
}

pub fn render(curve: &RiskCoverageCurve, title: &str) -> String {
    let mut s = String::new();
    let (x0, x1, y0, y1) = (x(0.0), x(1.0), y(0.0), y(1.0));
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        "<path d=\"M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>"
    );
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let (tx, ty) = (x(t), y(t));
        let _ = writeln!(
            s,
            "<line x1=\"{tx:.2}\" y1=\"{y0:.2}\" x2=\"{tx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            y0 + 4.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{tx:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{t}</text>",
            y0 + 16.0
        );
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{ty:.2}\" x2=\"{x0:.2}\" y2=\"{ty:.2}\" stroke=\"black\"/>",
            x0 - 4.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{t}</text>",
            x0 - 7.0,
            ty + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">coverage</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">risk</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    let points: Vec<String> = step_points(curve)
        .into_iter()
        .map(|(c, r)| format!("{:.2},{:.2}", x(c), y(r)))
        .collect();
    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>",
        points.join(" ")
    );
    s.push_str("</svg>\n");
    s
}
