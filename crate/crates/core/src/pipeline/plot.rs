//! Horizontal bar chart as standalone SVG.

use std::fmt::Write;

const ROW: f64 = 22.0;
const LABEL_W: f64 = 220.0;
const BAR_W: f64 = 420.0;
const TOP: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One bar per `(label, value, colour)`, longest first as given.
pub fn bar_chart_svg(title: &str, axis_label: &str, bars: &[(String, f64, &str)]) -> String {
    let max = bars.iter().map(|b| b.1).fold(0.0_f64, f64::max);
    let scale = if max > 0.0 { BAR_W / max } else { 0.0 };
    let height = TOP + ROW * bars.len() as f64 + 50.0;
    let width = LABEL_W + BAR_W + 90.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" font-size="15" text-anchor="middle">{}</text>"#, width / 2.0, escape(title));
    for (i, (label, v, colour)) in bars.iter().enumerate() {
        let y = TOP + ROW * i as f64;
        let w = v * scale;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LABEL_W - 8.0, y + 14.0, escape(label));
        let _ = writeln!(s, r#"<rect x="{LABEL_W}" y="{}" width="{w:.2}" height="{}" fill="{colour}"/>"#, y + 3.0, ROW - 6.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}">{v:.4}</text>"#, LABEL_W + w + 4.0, y + 14.0);
    }
    let base = TOP + ROW * bars.len() as f64;
    let _ = writeln!(s, r#"<line x1="{LABEL_W}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#, LABEL_W + BAR_W);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LABEL_W + BAR_W / 2.0, base + 30.0, escape(axis_label));
    s.push_str("</svg>\n");
    s
}
