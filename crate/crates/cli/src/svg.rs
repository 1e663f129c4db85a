//! Static SVG of polylines: identity for n = 2, an orthographic view along
//! `(1, 1, 1)` for n = 3, the first two coordinates otherwise.

use std::fmt::Write as _;

use qg_core::Polyline;

const SIZE: f64 = 480.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn project(v: &[f64]) -> (f64, f64) {
    match v.len() {
        0 => (0.0, 0.0),
        1 => (v[0], 0.0),
        3 => {
            let s2 = std::f64::consts::SQRT_2;
            let s6 = 6f64.sqrt();
            ((v[0] - v[1]) / s2, (v[0] + v[1] - 2.0 * v[2]) / s6)
        }
        _ => (v[0], v[1]),
    }
}

/// `radius` sets the view box (the ball is drawn as a faint circle).
pub fn polylines_svg(lines: &[Polyline], radius: f64) -> String {
    let r = radius.max(f64::MIN_POSITIVE);
    let map = |(x, y): (f64, f64)| (SIZE / 2.0 + x / r * SIZE * 0.45, SIZE / 2.0 - y / r * SIZE * 0.45);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<circle cx="{c}" cy="{c}" r="{rr}" fill="none" stroke="#cccccc" stroke-dasharray="4 3"/>"##,
        c = SIZE / 2.0,
        rr = SIZE * 0.45
    );
    for (i, line) in lines.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = line.vertices().iter().map(|v| map(project(v.as_slice()))).collect();
        if line.is_closed() {
            if let Some(&first) = pts.first() {
                pts.push(first);
            }
        }
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            COLORS[i % COLORS.len()],
            coords.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}
