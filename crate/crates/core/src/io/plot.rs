use std::fmt::Write;

use crate::eval::Curve;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// x: center error threshold in pixels, 0 to 50.
    Precision,
    /// x: overlap threshold, 0 to 1.
    Success,
}

impl CurveKind {
    fn x_range(self) -> (f64, f64) {
        match self {
            CurveKind::Precision => (0.0, 50.0),
            CurveKind::Success => (0.0, 1.0),
        }
    }

    fn x_label(self) -> &'static str {
        match self {
            CurveKind::Precision => "Location error threshold (px)",
            CurveKind::Success => "Overlap threshold",
        }
    }

    fn y_label(self) -> &'static str {
        match self {
            CurveKind::Precision => "Precision",
            CurveKind::Success => "Success rate",
        }
    }

    fn x_ticks(self) -> Vec<f64> {
        match self {
            CurveKind::Precision => (0..=5).map(|k| k as f64 * 10.0).collect(),
            CurveKind::Success => (0..=5).map(|k| k as f64 * 0.2).collect(),
        }
    }
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of `curve` on fixed axes, as a standalone SVG document.
pub fn render_curve_svg(curve: &Curve, kind: CurveKind, title: &str) -> String {
    let (x0, x1) = kind.x_range();
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x.clamp(x0, x1) - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    for t in kind.x_ticks() {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{TOP:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            t
        );
    }
    for k in 0..=5 {
        let v = k as f64 * 0.2;
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    );
    let points: Vec<String> = curve.iter().map(|&(t, v)| format!("{:.2},{:.2}", sx(t), sy(v))).collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#c03" stroke-width="2"/>"##,
        points.join(" ")
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        kind.x_label()
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        kind.y_label()
    );
    s.push_str("</svg>\n");
    s
}
