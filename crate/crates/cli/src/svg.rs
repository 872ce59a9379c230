//! Minimal self-contained SVG line charts.

use std::fmt::Write;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub colour: usize,
    pub markers: bool,
    pub dashed: bool,
}

impl Series {
    pub fn markers(name: impl Into<String>, points: Vec<(f64, f64)>, colour: usize) -> Self {
        Series { name: name.into(), points, colour, markers: true, dashed: false }
    }

    pub fn line(name: impl Into<String>, points: Vec<(f64, f64)>, colour: usize) -> Self {
        Series { name: name.into(), points, colour, markers: false, dashed: false }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Horizontal reference line at `y` with a label.
    pub hline: Option<(f64, String)>,
    pub y_range: Option<(f64, f64)>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    pub fn render(&self) -> String {
        let (x0, x1) = range(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let (y0, y1) = self.y_range.unwrap_or_else(|| {
            range(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).chain(self.hline.iter().map(|h| h.0)))
        });
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
        writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(&self.title)).unwrap();
        // axes and ticks
        writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
        for (lo, hi, is_x) in [(x0, x1, true), (y0, y1, false)] {
            let step = nice_step(hi - lo);
            let mut t = (lo / step).ceil() * step;
            while t <= hi + 1e-9 * step {
                let label = format!("{}", (t / step).round() * step);
                let label = if label.len() > 8 { format!("{t:.3e}") } else { label };
                if is_x {
                    let x = sx(t);
                    writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0).unwrap();
                    writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#, TOP + ph + 18.0).unwrap();
                } else {
                    let y = sy(t);
                    writeln!(s, r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT, LEFT + pw).unwrap();
                    writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 6.0, y + 4.0).unwrap();
                }
                t += step;
            }
        }
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 12.0, escape(&self.x_label)).unwrap();
        writeln!(
            s,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        )
        .unwrap();
        if let Some((y, label)) = &self.hline {
            let yy = sy(*y);
            writeln!(s, r#"<line x1="{LEFT}" y1="{yy:.2}" x2="{}" y2="{yy:.2}" stroke="grey" stroke-dasharray="4 3"/>"#, LEFT + pw).unwrap();
            writeln!(s, r#"<text x="{}" y="{:.2}" fill="grey">{}</text>"#, LEFT + 4.0, yy - 4.0, escape(label)).unwrap();
        }
        for (k, ser) in self.series.iter().enumerate() {
            let colour = PALETTE[ser.colour % PALETTE.len()];
            let pts: Vec<(f64, f64)> = ser.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            if ser.markers {
                for &(x, y) in &pts {
                    writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#, sx(x), sy(y)).unwrap();
                }
            } else if pts.len() > 1 {
                let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
                writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"{dash}/>"#, path.join(" ")).unwrap();
            }
            let ly = TOP + 10.0 + 18.0 * k as f64;
            let lx = LEFT + pw + 12.0;
            writeln!(s, r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{colour}"/>"#, ly - 9.0).unwrap();
            writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 15.0, escape(&ser.name)).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_markup() {
        let c = Chart {
            title: "a < b".into(),
            x_label: "n".into(),
            y_label: "rate".into(),
            series: vec![Series::markers("m=1", vec![(1.0, 1.0), (2.0, 0.0)], 0), Series::line("fit", vec![(1.0, 0.9), (2.0, 0.1)], 0).dashed()],
            hline: Some((0.5, "half".into())),
            y_range: Some((0.0, 1.0)),
        };
        let s = c.render();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<circle").count(), 2);
        assert_eq!(s, c.render());
    }

    #[test]
    fn empty_chart_still_renders() {
        assert!(Chart::default().render().contains("</svg>"));
    }
}
