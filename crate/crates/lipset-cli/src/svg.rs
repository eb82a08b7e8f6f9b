//! Minimal SVG line plots.

use std::fmt::Write;

pub struct SvgPlot {
    width: f64,
    height: f64,
    margin: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    body: String,
}

impl SvgPlot {
    /// Plot area mapping `x_range × y_range` onto a `width × height` canvas.
    pub fn new(width: f64, height: f64, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Self { width, height, margin: 40.0, x_range: pad(x_range), y_range: pad(y_range), body: String::new() }
    }

    /// Range enclosing every point, widened by 5% on each side.
    pub fn fit(width: f64, height: f64, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yr = xr;
        for (x, y) in points {
            xr = (xr.0.min(x), xr.1.max(x));
            yr = (yr.0.min(y), yr.1.max(y));
        }
        if !xr.0.is_finite() {
            xr = (0.0, 1.0);
            yr = (0.0, 1.0);
        }
        let widen = |(a, b): (f64, f64)| {
            let d = 0.05 * (b - a).max(1e-12);
            (a - d, b + d)
        };
        Self::new(width, height, widen(xr), widen(yr))
    }

    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let w = self.width - 2.0 * self.margin;
        let h = self.height - 2.0 * self.margin;
        let px = self.margin + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * w;
        let py = self.height - self.margin - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0) * h;
        (px, py)
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], color: &str, width: f64) {
        let coords: Vec<String> = points
            .iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
            coords.join(" ")
        );
    }

    pub fn circle(&mut self, p: (f64, f64), r: f64, color: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{r}" fill="{color}"/>"#);
    }

    pub fn render(&self, x_label: &str, y_label: &str) -> String {
        let (w, h, m) = (self.width, self.height, self.margin);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - 2.0 * m,
            h - 2.0 * m
        );
        let label = |v: f64| format!("{v:.3}");
        let _ = writeln!(s, r#"<text x="{m}" y="{}" font-size="11">{}</text>"#, h - m + 14.0, label(self.x_range.0));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
            w - m,
            h - m + 14.0,
            label(self.x_range.1)
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#, m - 4.0, h - m, label(self.y_range.0));
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#, m - 4.0, m + 10.0, label(self.y_range.1));
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{x_label}</text>"#, w / 2.0, h - 8.0);
        let _ = writeln!(
            s,
            r#"<text x="12" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {})">{y_label}</text>"#,
            h / 2.0,
            h / 2.0
        );
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }
}
