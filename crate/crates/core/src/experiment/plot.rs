use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

/// Standalone SVG line chart. Output depends only on the inputs.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Config("nothing to plot: no series given".into()));
    }
    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        escape(title)
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            MARGIN_TOP,
            MARGIN_TOP + ph,
            MARGIN_TOP + ph + 16.0,
            t
        );
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_LEFT,
            MARGIN_LEFT + pw,
            MARGIN_LEFT - 6.0,
            y + 4.0,
            (t * 1e6).round() / 1e6
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN_TOP + 10.0 + 20.0 * i as f64;
        let lx = MARGIN_LEFT + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

const REQUIRED: [&str; 3] = ["epoch", "mean_total_reward", "policy_entropy"];

/// `(epoch, value)` points of one column.
pub type Curve = Vec<(f64, f64)>;

/// Reads the reward and entropy columns of a training-log CSV.
pub fn read_training_csv(path: &Path) -> Result<(Curve, Curve)> {
    let text = fs::read_to_string(path)?;
    let format = |reason: String| Error::Format {
        path: path.to_owned(),
        reason,
    };
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|c| !header.contains(c)).collect();
    if !missing.is_empty() {
        return Err(format(format!("missing columns {missing:?}; found {header:?}")));
    }
    let col = |name: &str| header.iter().position(|h| *h == name).expect("checked above");
    let (ie, ir, ih) = (col("epoch"), col("mean_total_reward"), col("policy_entropy"));
    let mut reward = Vec::new();
    let mut entropy = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        let num = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| format(format!("row {}: column {:?} is not a number", n + 1, header[i])))
        };
        let e = num(ie)?;
        reward.push((e, num(ir)?));
        entropy.push((e, num(ih)?));
    }
    Ok((reward, entropy))
}

/// Reward and entropy charts over the given training logs, one series per
/// CSV. Only the CSVs are read. Returns the written files.
pub fn plot_training_logs(inputs: &[(String, PathBuf)], dir: &Path) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(Error::Config("nothing to plot: no input CSVs".into()));
    }
    let mut rewards = Vec::new();
    let mut entropies = Vec::new();
    for (label, path) in inputs {
        let (r, h) = read_training_csv(path)?;
        rewards.push(Series {
            label: label.clone(),
            points: r,
        });
        entropies.push(Series {
            label: label.clone(),
            points: h,
        });
    }
    let reward_svg = line_chart_svg("Average total reward", "epoch", "mean total reward", &rewards)?;
    let entropy_svg = line_chart_svg("Policy entropy", "epoch", "entropy (nats per dimension)", &entropies)?;
    fs::create_dir_all(dir)?;
    let files = vec![dir.join("reward.svg"), dir.join("entropy.svg")];
    fs::write(&files[0], reward_svg)?;
    fs::write(&files[1], entropy_svg)?;
    Ok(files)
}
