//! Minimal SVG writers for heatmaps, bar charts and line plots.

use std::fmt::Write;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"12\"";

/// Dark blue at 0 through teal and green to yellow at 1.
const STOPS: [(f64, [u8; 3]); 5] = [
    (0.0, [13, 8, 135]),
    (0.25, [33, 102, 172]),
    (0.5, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.0, [253, 231, 37]),
];

/// Linear colormap on `[0, 1]`; values outside are clamped.
pub fn color(t: f64) -> String {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let i = STOPS.iter().rposition(|(s, _)| *s <= t).unwrap_or(0).min(STOPS.len() - 2);
    let (t0, c0) = STOPS[i];
    let (t1, c1) = STOPS[i + 1];
    let f = (t - t0) / (t1 - t0);
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2]))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" {FONT} font-weight=\"bold\">{}</text>",
        width / 2.0,
        escape(title)
    );
}

/// Precision grid with steps along x and channels along y. `grid[k][c]` is
/// drawn at column `k`; cells are emitted in the same step-major order as
/// the CSV rows. The color scale runs linearly from 0 to `scale_max`.
pub fn heatmap(grid: &[Vec<f64>], channel_labels: &[String], scale_max: f64, title: &str) -> String {
    let steps = grid.len();
    let channels = channel_labels.len();
    let cell = 36.0;
    let (left, top) = (50.0, 40.0);
    let bar_x = left + steps as f64 * cell + 30.0;
    let width = bar_x + 90.0;
    let height = top + channels as f64 * cell + 50.0;
    let mut out = String::new();
    header(&mut out, width, height, title);
    for (k, row) in grid.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let t = if scale_max > 0.0 { v / scale_max } else { 0.0 };
            let _ = writeln!(
                out,
                "<rect data-step=\"{}\" data-channel=\"{}\" x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" stroke=\"white\" stroke-width=\"0.5\"><title>k={} {}: {}</title></rect>",
                k + 1,
                c + 1,
                left + k as f64 * cell,
                top + c as f64 * cell,
                color(t),
                k + 1,
                escape(&channel_labels[c]),
                v
            );
        }
    }
    for (c, label) in channel_labels.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT}>{}</text>",
            left - 6.0,
            top + (c as f64 + 0.5) * cell + 4.0,
            escape(label)
        );
    }
    for k in 0..steps {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{}</text>",
            left + (k as f64 + 0.5) * cell,
            top + channels as f64 * cell + 16.0,
            k + 1
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>step k</text>",
        left + steps as f64 * cell / 2.0,
        top + channels as f64 * cell + 34.0
    );
    // Colorbar, 0 at the bottom.
    let bar_h = channels as f64 * cell;
    let segments = 32;
    for i in 0..segments {
        let t = i as f64 / (segments - 1) as f64;
        let h = bar_h / segments as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{bar_x}\" y=\"{:.3}\" width=\"16\" height=\"{:.3}\" fill=\"{}\"/>",
            top + bar_h - (i + 1) as f64 * h,
            h + 0.5,
            color(t)
        );
    }
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" {FONT}>{}</text>", bar_x + 20.0, top + 10.0, fmt_num(scale_max));
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" {FONT}>0</text>", bar_x + 20.0, top + bar_h);
    out.push_str("</svg>\n");
    out
}

/// Vertical bars with a label under each and an annotation above.
pub fn bar_chart(labels: &[String], values: &[f64], annotations: &[String], y_label: &str, title: &str) -> String {
    let (left, top, plot_h, bar_w, gap) = (60.0, 40.0, 240.0, 60.0, 30.0);
    let width = left + labels.len() as f64 * (bar_w + gap) + gap;
    let height = top + plot_h + 60.0;
    let vmax = values.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut out = String::new();
    header(&mut out, width, height, title);
    let base = top + plot_h;
    let _ = writeln!(out, "<line x1=\"{left}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>", width - 10.0);
    let _ = writeln!(out, "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{base}\" stroke=\"black\"/>");
    let _ = writeln!(
        out,
        "<text x=\"15\" y=\"{}\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\" {FONT}>{}</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(y_label)
    );
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT}>{}</text>", left - 4.0, top + 4.0, fmt_num(vmax));
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let x = left + gap + i as f64 * (bar_w + gap);
        let h = if v.is_finite() { (v / vmax).max(0.0) * plot_h } else { 0.0 };
        let _ = writeln!(
            out,
            "<rect x=\"{x}\" y=\"{}\" width=\"{bar_w}\" height=\"{h}\" fill=\"{}\"/>",
            base - h,
            color(0.25)
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{}</text>",
            x + bar_w / 2.0,
            base + 16.0,
            escape(label)
        );
        if let Some(a) = annotations.get(i) {
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{}</text>",
                x + bar_w / 2.0,
                base - h - 6.0,
                escape(a)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One polyline series, optionally with a shaded band `lower..upper`.
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub band: Option<(Vec<f64>, Vec<f64>)>,
}

/// A single panel of line plots.
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
    /// Marker points drawn as small squares.
    pub markers: Vec<[f64; 2]>,
    pub equal_aspect: bool,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn bounds(panel: &Panel) -> (f64, f64, f64, f64) {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in &panel.series {
        xs.extend(&s.x);
        ys.extend(&s.y);
        if let Some((lo, hi)) = &s.band {
            ys.extend(lo);
            ys.extend(hi);
        }
    }
    for m in &panel.markers {
        xs.push(m[0]);
        ys.push(m[1]);
    }
    let fold = |v: &[f64]| {
        v.iter()
            .filter(|x| x.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
    };
    let (mut x0, mut x1) = fold(&xs);
    let (mut y0, mut y1) = fold(&ys);
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (px, py) = (0.05 * (x1 - x0), 0.05 * (y1 - y0));
    (x0 - px, x1 + px, y0 - py, y1 + py)
}

fn polyline(xs: &[f64], ys: &[f64], map: &impl Fn(f64, f64) -> (f64, f64)) -> String {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let (u, v) = map(x, y);
            format!("{u:.2},{v:.2}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Grid of panels, `columns` wide.
pub fn line_panels(panels: &[Panel], columns: usize, title: &str) -> String {
    let (pw, ph) = (320.0, 240.0);
    let columns = columns.max(1);
    let rows = panels.len().div_ceil(columns);
    let width = columns as f64 * pw;
    let height = 30.0 + rows as f64 * ph;
    let mut out = String::new();
    header(&mut out, width, height, title);
    for (i, panel) in panels.iter().enumerate() {
        let ox = (i % columns) as f64 * pw;
        let oy = 30.0 + (i / columns) as f64 * ph;
        let (left, right, top, bottom) = (ox + 55.0, ox + pw - 15.0, oy + 25.0, oy + ph - 30.0);
        let (mut x0, mut x1, mut y0, mut y1) = bounds(panel);
        if panel.equal_aspect {
            let sx = (x1 - x0) / (right - left);
            let sy = (y1 - y0) / (bottom - top);
            let s = sx.max(sy);
            let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
            x0 = cx - s * (right - left) / 2.0;
            x1 = cx + s * (right - left) / 2.0;
            y0 = cy - s * (bottom - top) / 2.0;
            y1 = cy + s * (bottom - top) / 2.0;
        }
        let map = |x: f64, y: f64| {
            (
                left + (x - x0) / (x1 - x0) * (right - left),
                bottom - (y - y0) / (y1 - y0) * (bottom - top),
            )
        };
        let _ = writeln!(
            out,
            "<rect x=\"{left}\" y=\"{top}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>",
            right - left,
            bottom - top
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{}</text>",
            (left + right) / 2.0,
            top - 8.0,
            escape(&panel.title)
        );
        let _ = writeln!(out, "<text x=\"{left}\" y=\"{}\" {FONT}>{}</text>", bottom + 16.0, fmt_num(x0));
        let _ = writeln!(out, "<text x=\"{right}\" y=\"{}\" text-anchor=\"end\" {FONT}>{}</text>", bottom + 16.0, fmt_num(x1));
        let _ = writeln!(out, "<text x=\"{}\" y=\"{bottom}\" text-anchor=\"end\" {FONT}>{}</text>", left - 4.0, fmt_num(y0));
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT}>{}</text>", left - 4.0, top + 10.0, fmt_num(y1));
        for (j, s) in panel.series.iter().enumerate() {
            let color = PALETTE[j % PALETTE.len()];
            if let Some((lo, hi)) = &s.band {
                let mut pts = polyline(&s.x, hi, &map);
                let rev_x: Vec<f64> = s.x.iter().rev().cloned().collect();
                let rev_lo: Vec<f64> = lo.iter().rev().cloned().collect();
                pts.push(' ');
                pts.push_str(&polyline(&rev_x, &rev_lo, &map));
                let _ = writeln!(out, "<polygon points=\"{pts}\" fill=\"{color}\" fill-opacity=\"0.25\" stroke=\"none\"/>");
            }
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                polyline(&s.x, &s.y, &map)
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" fill=\"{color}\" {FONT}>{}</text>",
                left + 6.0,
                top + 16.0 + 14.0 * j as f64,
                escape(&s.label)
            );
        }
        for m in &panel.markers {
            let (u, v) = map(m[0], m[1]);
            let _ = writeln!(out, "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"8\" height=\"8\" fill=\"black\"/>", u - 4.0, v - 4.0);
        }
    }
    out.push_str("</svg>\n");
    out
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-2 && v.abs() < 1e4 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}
