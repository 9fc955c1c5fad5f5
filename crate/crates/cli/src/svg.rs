//! Minimal SVG writer: axes, polylines, markers and filled cells.

use std::fmt::Write as _;

pub struct Plot {
    width: f64,
    height: f64,
    margin: f64,
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

impl Plot {
    pub fn new(width: f64, height: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        Plot { width, height, margin: 50.0, x: span(x.0, x.1), y: span(y.0, y.1), body: String::new() }
    }

    /// Bounding box of point sets, padded by 5 %; optionally with equal axis scales.
    pub fn fit(width: f64, height: f64, sets: &[&[(f64, f64)]], equal: bool) -> Self {
        let pts = sets.iter().flat_map(|s| s.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(a, b) in pts {
            x0 = x0.min(a);
            x1 = x1.max(a);
            y0 = y0.min(b);
            y1 = y1.max(b);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let (mut dx, mut dy) = ((x1 - x0).max(1e-9), (y1 - y0).max(1e-9));
        if equal {
            let s = dx.max(dy);
            x0 -= 0.5 * (s - dx);
            y0 -= 0.5 * (s - dy);
            dx = s;
            dy = s;
        }
        let p = 0.05;
        Plot::new(width, height, (x0 - p * dx, x0 + (1.0 + p) * dx), (y0 - p * dy, y0 + (1.0 + p) * dy))
    }

    fn px(&self, x: f64) -> f64 {
        self.margin + (x - self.x.0) / (self.x.1 - self.x.0) * (self.width - 2.0 * self.margin)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - self.margin - (y - self.y.0) / (self.y.1 - self.y.0) * (self.height - 2.0 * self.margin)
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ =
            writeln!(self.body, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{dash} points=\"{}\"/>", coords.join(" "));
    }

    pub fn marker(&mut self, x: f64, y: f64, color: &str, label: &str) {
        let (cx, cy) = (self.px(x), self.py(y));
        let _ = writeln!(self.body, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"{color}\"/>");
        if !label.is_empty() {
            let _ = writeln!(self.body, "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{}</text>", cx + 6.0, cy - 6.0, escape(label));
        }
    }

    pub fn vline(&mut self, x: f64, color: &str, label: &str) {
        let (cx, top, bottom) = (self.px(x), self.py(self.y.1), self.py(self.y.0));
        let _ = writeln!(
            self.body,
            "<line x1=\"{cx:.2}\" y1=\"{top:.2}\" x2=\"{cx:.2}\" y2=\"{bottom:.2}\" stroke=\"{color}\" stroke-dasharray=\"4 3\"/>"
        );
        let _ = writeln!(self.body, "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{}</text>", cx + 3.0, top + 12.0, escape(label));
    }

    /// Axis-aligned cell `[x0, x1] × [y0, y1]`.
    pub fn cell(&mut self, x0: f64, x1: f64, y0: f64, y1: f64, color: &str) {
        let (a, b) = (self.px(x0), self.px(x1));
        let (c, d) = (self.py(y1), self.py(y0));
        let _ = writeln!(
            self.body,
            "<rect x=\"{a:.2}\" y=\"{c:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\"/>",
            (b - a).abs(),
            (d - c).abs()
        );
    }

    pub fn legend(&mut self, entries: &[(&str, &str)]) {
        for (i, (color, label)) in entries.iter().enumerate() {
            let y = 20.0 + 16.0 * i as f64;
            let x = self.width - 200.0;
            let _ = writeln!(self.body, "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"12\" height=\"4\" fill=\"{color}\"/>", y - 4.0);
            let _ = writeln!(self.body, "<text x=\"{:.2}\" y=\"{y:.2}\" font-size=\"12\">{}</text>", x + 18.0, escape(label));
        }
    }

    pub fn render(&self, title: &str, x_label: &str, y_label: &str) -> String {
        let (w, h, m) = (self.width, self.height, self.margin);
        let mut s = String::new();
        let _ = writeln!(s, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">");
        let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
        let _ = writeln!(s, "<text x=\"{m}\" y=\"20\" font-size=\"14\">{}</text>", escape(title));
        let _ =
            writeln!(s, "<rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>", w - 2.0 * m, h - 2.0 * m);
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
                self.px(xv),
                h - m + 14.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">{}</text>",
                m - 4.0,
                self.py(yv) + 3.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            w / 2.0,
            h - 12.0,
            escape(x_label)
        );
        let _ = writeln!(
            s,
            "<text x=\"14\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{}</text>",
            h / 2.0,
            h / 2.0,
            escape(y_label)
        );
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
