//! Deterministic SVG line plots of the runner's CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// Spectral gap against β, log y.
    Spectrum,
    /// Plateau KL against λ, log-log.
    LambdaSweep,
    /// Fitted KL decay rate against β.
    BetaSampling,
    /// KL against time, one line per β, log y.
    KlTrace,
    /// Excess risk against β, log-log.
    ExcessRisk,
}

struct Layout {
    x: &'static str,
    y: &'static str,
    group: Option<&'static str>,
    log_x: bool,
    log_y: bool,
    title: &'static str,
}

impl PlotKind {
    fn layout(self) -> Layout {
        let l = |x, y, group, log_x, log_y, title| Layout {
            x,
            y,
            group,
            log_x,
            log_y,
            title,
        };
        match self {
            PlotKind::Spectrum => l("beta", "gap", None, false, true, "spectral gap"),
            PlotKind::LambdaSweep => l("lambda", "plateau_kl", None, true, true, "plateau KL"),
            PlotKind::BetaSampling => l("beta", "rate", None, false, false, "KL decay rate"),
            PlotKind::KlTrace => l("time", "kl", Some("beta"), false, true, "KL trace"),
            PlotKind::ExcessRisk => l("beta", "excess_risk", None, true, true, "excess risk"),
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Renders the CSV at `path` as SVG.
pub fn plot_csv(path: &Path, kind: PlotKind) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    plot_bytes(&bytes, kind).map_err(|e| match e {
        CliError::Csv { message, .. } => CliError::Csv {
            path: path.to_path_buf(),
            message,
        },
        e => e,
    })
}

pub fn plot_bytes(bytes: &[u8], kind: PlotKind) -> CliResult<String> {
    let lay = kind.layout();
    let csv_err = |e: csv::Error| CliError::Csv {
        path: Default::default(),
        message: e.to_string(),
    };
    let mut rdr = csv::Reader::from_reader(bytes);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(CliError::Schema("empty CSV: no header row".into()));
    }
    let col = |name: &str| header.iter().position(|h| h == name);
    let needed: Vec<&str> = [Some(lay.x), Some(lay.y), lay.group].into_iter().flatten().collect();
    let missing: Vec<&str> = needed.iter().copied().filter(|n| col(n).is_none()).collect();
    if !missing.is_empty() {
        return Err(CliError::Schema(format!("missing columns: {}", missing.join(", "))));
    }
    let (ix, iy) = (col(lay.x).unwrap(), col(lay.y).unwrap());
    let ig = lay.group.and_then(col);

    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut n_rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        n_rows += 1;
        let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
        let key = ig.and_then(|i| rec.get(i)).unwrap_or("").to_string();
        let (Some(x), Some(y)) = (num(ix), num(iy)) else { continue };
        if !x.is_finite() || !y.is_finite() || (lay.log_x && x <= 0.0) || (lay.log_y && y <= 0.0) {
            continue;
        }
        match series.iter_mut().find(|s| s.0 == key) {
            Some(s) => s.1.push((x, y)),
            None => series.push((key, vec![(x, y)])),
        }
    }
    if n_rows == 0 {
        return Err(CliError::Schema("empty CSV: no data rows".into()));
    }
    Ok(render(&lay, &series))
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(vals: impl Iterator<Item = f64>, log: bool) -> Self {
        let t = |v: f64| if log { v.log10() } else { v };
        let (mut lo, mut hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(t(v)), b.max(t(v))));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        } else {
            let pad = 0.05 * (hi - lo);
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let t = if self.log { v.log10() } else { v };
        (t - self.lo) / (self.hi - self.lo)
    }

    /// Tick values in data units.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
            let mut e = self.lo;
            let mut out = Vec::new();
            while e <= self.hi + 1e-9 {
                out.push(10f64.powf(e));
                e += step;
            }
            out
        } else {
            let raw = (self.hi - self.lo) / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap();
            let mut v = (self.lo / step).ceil() * step;
            let mut out = Vec::new();
            while v <= self.hi + 1e-9 * step {
                out.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
                v += step;
            }
            out
        }
    }
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn render(lay: &Layout, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let pts = || series.iter().flat_map(|s| s.1.iter());
    let ax = Axis::new(pts().map(|p| p.0), lay.log_x);
    let ay = Axis::new(pts().map(|p| p.1), lay.log_y);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + ax.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - ay.frac(y)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, lay.title);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in ax.ticks() {
        let x = px(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(t));
    }
    for t in ay.ticks() {
        let y = py(t);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, label(t));
    }
    let scale = |log: bool| if log { " (log)" } else { "" };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}{}</text>"#,
        LEFT + pw / 2.0,
        H - 16.0,
        lay.x,
        scale(lay.log_x)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        lay.y,
        scale(lay.log_y)
    );
    for (k, (key, data)) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let mut sorted = data.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = sorted.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, path.join(" "));
        for &(x, y) in &sorted {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, px(x), py(y));
        }
        if let Some(g) = lay.group {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" fill="{c}">{g} = {key}</text>"#,
                LEFT + pw - 110.0,
                TOP + 16.0 + 15.0 * k as f64
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
