//! Static SVG rendering of a brightness curve with its sections.

use std::fmt::Write as _;

use crate::curve::BrightnessCurve;

pub const WIDTH: f64 = 1200.0;
pub const HEIGHT: f64 = 300.0;

/// A labelled time span, in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Curve as one polyline, a dashed line at every inner section boundary and
/// each label centred over its section.
pub fn plot_svg(curve: &BrightnessCurve, sections: &[Section]) -> String {
    let t0 = curve.t0();
    let span = curve.time_of(curve.len() - 1) - t0;
    let x_of = |t: f64| if span > 0.0 { (t - t0) / span * WIDTH } else { 0.0 };
    let y_of = |v: f64| (1.0 - v) * HEIGHT;

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )
    .unwrap();

    let points: Vec<String> = curve
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{:.2},{:.2}", x_of(curve.time_of(i)), y_of(v)))
        .collect();
    writeln!(
        out,
        "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"{}\"/>",
        points.join(" ")
    )
    .unwrap();

    for s in sections.iter().skip(1) {
        let x = x_of(s.start_s);
        writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"0\" x2=\"{x:.2}\" y2=\"{HEIGHT}\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>"
        )
        .unwrap();
    }
    for s in sections {
        let x = x_of((s.start_s + s.end_s) / 2.0).clamp(0.0, WIDTH);
        writeln!(
            out,
            "<text x=\"{x:.2}\" y=\"14\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            escape(&s.label)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
