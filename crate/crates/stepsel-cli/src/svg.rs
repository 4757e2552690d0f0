//! Dependency-free single-panel SVG plots for diagnostics.
//!
//! Hand-emitted paths and axes; output contains no timestamps or other
//! nondeterministic metadata.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 440.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_ranges(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Frame {
        let mut f = Frame { x_min: f64::INFINITY, x_max: f64::NEG_INFINITY, y_min: f64::INFINITY, y_max: f64::NEG_INFINITY };
        for x in xs {
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
        }
        for y in ys {
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
        for (lo, hi) in [(&mut f.x_min, &mut f.x_max), (&mut f.y_min, &mut f.y_max)] {
            if !lo.is_finite() || !hi.is_finite() {
                *lo = 0.0;
                *hi = 1.0;
            }
            if *hi - *lo < 1e-12 {
                *lo -= 0.5;
                *hi += 0.5;
            }
            let pad = (*hi - *lo) * 0.05;
            *lo -= pad;
            *hi += pad;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x_min) / (self.x_max - self.x_min) * (W - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        H - MB - (y - self.y_min) / (self.y_max - self.y_min) * (H - MT - MB)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

fn axes(f: &Frame, xlabel: &str, ylabel: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - ML - MR,
        H - MT - MB
    );
    for i in 0..=4 {
        let xv = f.x_min + (f.x_max - f.x_min) * i as f64 / 4.0;
        let yv = f.y_min + (f.y_max - f.y_min) * i as f64 / 4.0;
        let _ = write!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{:.3}</text>\n",
            f.px(xv),
            H - MB + 18.0,
            xv
        );
        let _ = write!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{:.3}</text>\n",
            ML - 6.0,
            f.py(yv) + 4.0,
            yv
        );
    }
    let _ = write!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = write!(
        s,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        escape(ylabel)
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polyline through (x, y) points.
pub fn line_plot(points: &[(f64, f64)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let f = Frame::from_ranges(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
    let mut s = header(title);
    s.push_str(&axes(&f, xlabel, ylabel));
    let mut path = String::from("<polyline fill=\"none\" stroke=\"#c23\" stroke-width=\"1.5\" points=\"");
    for (x, y) in points {
        let _ = write!(path, "{:.2},{:.2} ", f.px(*x), f.py(*y));
    }
    path.push_str("\"/>\n");
    s.push_str(&path);
    s.push_str("</svg>\n");
    s
}

/// Horizontal bar chart, one bar per label.
pub fn bar_chart(labels: &[String], values: &[f64], title: &str, xlabel: &str) -> String {
    let f = Frame::from_ranges(values.iter().copied().chain([0.0]), [0.0, 1.0].into_iter());
    let mut s = header(title);
    let n = labels.len().max(1);
    let band = (H - MT - MB) / n as f64;
    let _ = write!(
        s,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - ML - MR,
        H - MT - MB
    );
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let y = MT + i as f64 * band;
        let x0 = f.px(0.0_f64.min(v));
        let x1 = f.px(0.0_f64.max(v));
        let _ = write!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#369\"/>\n",
            x0,
            y + band * 0.15,
            (x1 - x0).max(0.5),
            band * 0.7
        );
        let _ = write!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            ML - 6.0,
            y + band * 0.6,
            escape(label)
        );
    }
    let _ = write!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    s.push_str("</svg>\n");
    s
}

/// Point estimates with vertical CI whiskers per label.
pub fn effect_plot(labels: &[String], estimates: &[f64], lows: &[f64], highs: &[f64], title: &str) -> String {
    let f = Frame::from_ranges(
        (0..labels.len()).map(|i| i as f64),
        lows.iter().chain(highs).chain(estimates).copied().chain([0.0]),
    );
    let mut s = header(title);
    s.push_str(&axes(&f, "feature", "effect"));
    let zero_y = f.py(0.0);
    let _ = write!(
        s,
        "<line x1=\"{ML}\" y1=\"{zero_y:.2}\" x2=\"{:.2}\" y2=\"{zero_y:.2}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n",
        W - MR
    );
    for (i, ((est, lo), hi)) in estimates.iter().zip(lows).zip(highs).enumerate() {
        let x = f.px(i as f64);
        let _ = write!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#c23\" stroke-width=\"1.5\"/>\n",
            f.py(*lo),
            f.py(*hi)
        );
        let _ = write!(s, "<circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"#c23\"/>\n", f.py(*est));
        let _ = write!(
            s,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
            H - MB + 30.0,
            escape(&labels[i])
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Embedding scatter with group-coded labels and effect arrows from origin.
pub fn biplot(
    positions: &[(usize, Vec<f64>)],
    groups: Option<&Vec<(usize, usize)>>,
    arrows: &[(String, Vec<f64>)],
    title: &str,
) -> String {
    let colors = ["#c23", "#369", "#2a2", "#a3a", "#970", "#099"];
    let f = Frame::from_ranges(
        positions.iter().map(|(_, p)| p[0]).chain(arrows.iter().map(|(_, a)| a[0])).chain([0.0]),
        positions.iter().map(|(_, p)| p[1]).chain(arrows.iter().map(|(_, a)| a[1])).chain([0.0]),
    );
    let mut s = header(title);
    s.push_str(&axes(&f, "dim 1", "dim 2"));
    for (id, pos) in positions {
        let g = groups
            .and_then(|gl| gl.iter().find(|(gid, _)| gid == id).map(|(_, g)| *g))
            .unwrap_or(0);
        let c = colors[g % colors.len()];
        let _ = write!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{c}\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"9\">{id}</text>\n",
            f.px(pos[0]),
            f.py(pos[1]),
            f.px(pos[0]) + 5.0,
            f.py(pos[1]) - 5.0
        );
    }
    let (ox, oy) = (f.px(0.0), f.py(0.0));
    for (name, a) in arrows {
        let _ = write!(
            s,
            "<line x1=\"{ox:.2}\" y1=\"{oy:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1.2\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
            f.px(a[0]),
            f.py(a[1]),
            f.px(a[0]) + 4.0,
            f.py(a[1]),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
