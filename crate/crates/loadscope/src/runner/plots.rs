//! Hand-rolled SVG emitters for the run's summary figures: multi-series
//! line charts (with an optional unit diagonal for calibration views) and
//! a signed heatmap. Output is plain text built from deterministic
//! formatting, so plot files hash stably across runs.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

/// One named polyline.
pub(crate) struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Tick label: trims trailing zeros so axes stay readable.
fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.into()
    }
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn from_series(series: &[Series]) -> Self {
        let mut x_lo = f64::INFINITY;
        let mut x_hi = f64::NEG_INFINITY;
        let mut y_lo = f64::INFINITY;
        let mut y_hi = f64::NEG_INFINITY;
        for s in series {
            for &(x, y) in &s.points {
                x_lo = x_lo.min(x);
                x_hi = x_hi.max(x);
                y_lo = y_lo.min(y);
                y_hi = y_hi.max(y);
            }
        }
        if !x_lo.is_finite() {
            (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
        }
        // Degenerate spans still need a drawable box.
        if x_hi - x_lo < 1e-12 {
            x_lo -= 0.5;
            x_hi += 0.5;
        }
        if y_hi - y_lo < 1e-12 {
            y_lo -= 0.5;
            y_hi += 0.5;
        }
        Self { x_lo, x_hi, y_lo, y_hi }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn svg_open(buf: &mut String, title: &str) {
    let _ = write!(
        buf,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(buf: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let _ = write!(
        buf,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = frame.x_lo + t * (frame.x_hi - frame.x_lo);
        let yv = frame.y_lo + t * (frame.y_hi - frame.y_lo);
        let px = frame.px(xv);
        let py = frame.py(yv);
        let _ = write!(
            buf,
            "<line x1=\"{}\" y1=\"{y0}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt(px),
            fmt(px),
            fmt(y0 + 4.0),
            fmt(px),
            fmt(y0 + 18.0),
            tick_label(xv)
        );
        let _ = write!(
            buf,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{x0}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            fmt(x0 - 4.0),
            fmt(py),
            fmt(py),
            fmt(x0 - 7.0),
            fmt(py + 4.0),
            tick_label(yv)
        );
    }
    let _ = write!(
        buf,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt((x0 + x1) / 2.0),
        fmt(HEIGHT - 10.0),
        escape(x_label),
        fmt((y0 + y1) / 2.0),
        fmt((y0 + y1) / 2.0),
        escape(y_label)
    );
}

/// Multi-series line chart. `diagonal` draws the y = x reference used by
/// reliability and Q-Q views.
pub(crate) fn write_line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    diagonal: bool,
) -> io::Result<()> {
    let frame = Frame::from_series(series);
    let mut buf = String::new();
    svg_open(&mut buf, title);
    axes(&mut buf, &frame, x_label, y_label);
    if diagonal {
        let lo = frame.x_lo.max(frame.y_lo);
        let hi = frame.x_hi.min(frame.y_hi);
        if hi > lo {
            let _ = write!(
                buf,
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#aaaaaa\" stroke-dasharray=\"4 3\"/>\n",
                fmt(frame.px(lo)),
                fmt(frame.py(lo)),
                fmt(frame.px(hi)),
                fmt(frame.py(hi))
            );
        }
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{},{}", fmt(frame.px(x)), fmt(frame.py(y)))).collect();
        let _ = write!(
            buf,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        );
        let ly = MARGIN_T + 16.0 * i as f64;
        let _ = write!(
            buf,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"3\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            fmt(WIDTH - MARGIN_R + 10.0),
            fmt(ly),
            fmt(WIDTH - MARGIN_R + 28.0),
            fmt(ly),
            fmt(WIDTH - MARGIN_R + 34.0),
            fmt(ly + 4.0),
            escape(&s.name)
        );
    }
    buf.push_str("</svg>\n");
    fs::write(path, buf)
}

/// Diverging color for a value in [-limit, limit]: red for negative,
/// green for positive, white at zero.
fn cell_color(v: f64, limit: f64) -> String {
    let t = if limit > 0.0 { (v / limit).clamp(-1.0, 1.0) } else { 0.0 };
    let (r, g, b) = if t >= 0.0 {
        let u = 1.0 - t;
        (46.0 + u * 209.0, 139.0 + u * 116.0, 87.0 + u * 168.0)
    } else {
        let u = 1.0 + t;
        (231.0 + u * 24.0, 76.0 + u * 179.0, 60.0 + u * 195.0)
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Row-label by column-label grid of signed values with in-cell numbers.
pub(crate) fn write_heatmap(
    path: &Path,
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[Vec<f64>],
) -> io::Result<()> {
    let rows = row_labels.len().max(1);
    let cols = col_labels.len().max(1);
    let label_w = 150.0;
    let cell_w = (WIDTH - label_w - 20.0) / cols as f64;
    let cell_h = ((HEIGHT - MARGIN_T - 30.0) / rows as f64).min(44.0);
    let limit = values
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-9);

    let mut buf = String::new();
    svg_open(&mut buf, title);
    for (j, label) in col_labels.iter().enumerate() {
        let _ = write!(
            buf,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt(label_w + (j as f64 + 0.5) * cell_w),
            fmt(MARGIN_T + 12.0),
            escape(label)
        );
    }
    for (i, label) in row_labels.iter().enumerate() {
        let y = MARGIN_T + 20.0 + i as f64 * cell_h;
        let _ = write!(
            buf,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            fmt(label_w - 8.0),
            fmt(y + cell_h / 2.0 + 4.0),
            escape(label)
        );
        for j in 0..col_labels.len() {
            let v = values.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0);
            let x = label_w + j as f64 * cell_w;
            let _ = write!(
                buf,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"white\"/>\n\
                 <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                fmt(x),
                fmt(y),
                fmt(cell_w),
                fmt(cell_h),
                cell_color(v, limit),
                fmt(x + cell_w / 2.0),
                fmt(y + cell_h / 2.0 + 4.0),
                fmt(v)
            );
        }
    }
    buf.push_str("</svg>\n");
    fs::write(path, buf)
}
