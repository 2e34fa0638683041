//! Standalone SVG emitters: line/log-log plots and bar charts, with the
//! plotted data embedded as comments so the artifacts stay diffable and
//! self-describing.

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn transform(v: f64, log: bool) -> f64 {
    if log {
        v.max(1e-300).log10()
    } else {
        v
    }
}

impl LinePlot {
    pub fn to_svg(&self) -> String {
        let mut pts: Vec<Vec<(f64, f64)>> = Vec::new();
        for s in &self.series {
            pts.push(
                s.points
                    .iter()
                    .filter(|(x, y)| x.is_finite() && y.is_finite())
                    .map(|&(x, y)| (transform(x, self.log_x), transform(y, self.log_y)))
                    .collect(),
            );
        }
        let all: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
        let (x0, x1) = bounds(all.iter().map(|p| p.0));
        let (y0, y1) = bounds(all.iter().map(|p| p.1));

        let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (W - MARGIN_L - MARGIN_R);
        let sy = |y: f64| H - MARGIN_B - (y - y0) / (y1 - y0) * (H - MARGIN_T - MARGIN_B);

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
        ));
        out.push_str("<!-- data:\n");
        for s in &self.series {
            out.push_str(&format!("  series {}\n", s.label));
            for (x, y) in &s.points {
                out.push_str(&format!("    {x:.12e} {y:.12e}\n"));
            }
        }
        out.push_str("-->\n");
        out.push_str(&format!(
            "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
            W / 2.0,
            xml_escape(&self.title)
        ));

        // axes
        out.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            H - MARGIN_B,
            W - MARGIN_R,
            H - MARGIN_B
        ));
        out.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
            H - MARGIN_B
        ));

        // ticks
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let label_x = if self.log_x { format!("1e{fx:.1}") } else { format!("{fx:.3}") };
            let label_y = if self.log_y { format!("1e{fy:.1}") } else { format!("{fy:.3}") };
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{label_x}</text>\n",
                sx(fx),
                H - MARGIN_B + 18.0
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{label_y}</text>\n",
                MARGIN_L - 6.0,
                sy(fy) + 4.0
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
            (MARGIN_L + W - MARGIN_R) / 2.0,
            H - 12.0,
            xml_escape(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{}</text>\n",
            (MARGIN_T + H - MARGIN_B) / 2.0,
            (MARGIN_T + H - MARGIN_B) / 2.0,
            xml_escape(&self.y_label)
        ));

        for (i, (s, p)) in self.series.iter().zip(&pts).enumerate() {
            let color = COLORS[i % COLORS.len()];
            let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            out.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                path.join(" ")
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
                W - MARGIN_R - 160.0,
                MARGIN_T + 16.0 * (i + 1) as f64,
                xml_escape(&s.label)
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Bar chart for spectra: index on x, value on y (log scale).
pub struct BarPlot {
    pub title: String,
    pub y_label: String,
    pub values: Vec<f64>,
}

impl BarPlot {
    pub fn to_svg(&self) -> String {
        let n = self.values.len().max(1);
        let logs: Vec<f64> = self.values.iter().map(|v| v.max(1e-300).log10()).collect();
        let (y0, y1) = bounds(logs.iter().copied());
        let bw = (W - MARGIN_L - MARGIN_R) / n as f64;
        let sy = |y: f64| H - MARGIN_B - (y - y0) / (y1 - y0) * (H - MARGIN_T - MARGIN_B);

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
        ));
        out.push_str("<!-- data:\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("    {i} {v:.12e}\n"));
        }
        out.push_str("-->\n");
        out.push_str(&format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
            W / 2.0,
            xml_escape(&self.title)
        ));
        for (i, &l) in logs.iter().enumerate() {
            let x = MARGIN_L + i as f64 * bw;
            let top = sy(l);
            out.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#1f77b4\"/>\n",
                x + 0.1 * bw,
                top,
                0.8 * bw,
                (H - MARGIN_B - top).max(0.0)
            ));
        }
        for i in 0..=4 {
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e{fy:.1}</text>\n",
                MARGIN_L - 6.0,
                sy(fy) + 4.0
            ));
        }
        out.push_str(&format!(
            "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{}</text>\n",
            H / 2.0,
            H / 2.0,
            xml_escape(&self.y_label)
        ));
        out.push_str("</svg>\n");
        out
    }
}

fn bounds<I: Iterator<Item = f64>>(values: I) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
