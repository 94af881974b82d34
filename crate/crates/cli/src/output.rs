//! CSV curves with `#` provenance lines, and their SVG renderings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::Settings;
use crate::CliError;

pub const CSV_HEADER: &str = "n,r,t,v,risk_mean,risk_se,seed";

/// One CSV row; `None` renders as an empty field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Row {
    pub n: Option<usize>,
    pub r: Option<f64>,
    pub t: Option<f64>,
    pub v: Option<f64>,
    pub risk_mean: f64,
    pub risk_se: Option<f64>,
    pub seed: u64,
}

fn key(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NEG_INFINITY)
}

impl Row {
    fn cmp_key(&self, other: &Row) -> std::cmp::Ordering {
        self.n
            .cmp(&other.n)
            .then(key(self.r).total_cmp(&key(other.r)))
            .then(key(self.t).total_cmp(&key(other.t)))
            .then(key(self.v).total_cmp(&key(other.v)))
            .then(self.seed.cmp(&other.seed))
    }

    fn render(&self) -> String {
        let f = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{:e},{},{}",
            self.n.map(|n| n.to_string()).unwrap_or_default(),
            f(self.r),
            f(self.t),
            f(self.v),
            self.risk_mean,
            f(self.risk_se),
            self.seed
        )
    }
}

/// A named curve: one CSV file.
#[derive(Debug, Clone, Default)]
pub struct Curve {
    pub name: String,
    /// What `risk_mean` holds for this curve.
    pub quantity: String,
    pub notes: Vec<String>,
    pub rows: Vec<Row>,
}

impl Curve {
    pub fn new(name: impl Into<String>, quantity: impl Into<String>) -> Self {
        Curve {
            name: name.into(),
            quantity: quantity.into(),
            ..Default::default()
        }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn render(&self, settings: &Settings) -> String {
        let mut rows = self.rows.clone();
        rows.sort_by(Row::cmp_key);
        let mut out = String::new();
        writeln!(out, "# advrisk {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(out, "# experiment: {}", settings.experiment).unwrap();
        writeln!(out, "# config-sha256: {}", settings.hash()).unwrap();
        writeln!(out, "# risk_mean: {}", self.quantity).unwrap();
        for n in &self.notes {
            writeln!(out, "# {n}").unwrap();
        }
        writeln!(out, "{CSV_HEADER}").unwrap();
        for r in &rows {
            writeln!(out, "{}", r.render()).unwrap();
        }
        out
    }
}

/// Write each curve as `<name>.csv`. When the run failed, files keep a
/// `.partial` suffix.
pub fn write_curves(dir: &Path, curves: &[Curve], settings: &Settings, complete: bool) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for c in curves {
        let final_path = dir.join(format!("{}.csv", c.name));
        let partial = dir.join(format!("{}.csv.partial", c.name));
        std::fs::write(&partial, c.render(settings))
            .map_err(|e| CliError::Io(format!("writing {}: {e}", partial.display())))?;
        if complete {
            std::fs::rename(&partial, &final_path)
                .map_err(|e| CliError::Io(format!("renaming {}: {e}", partial.display())))?;
            written.push(final_path);
            if settings.plot {
                let svg = dir.join(format!("{}.svg", c.name));
                std::fs::write(&svg, render_svg(c))
                    .map_err(|e| CliError::Io(format!("writing {}: {e}", svg.display())))?;
                written.push(svg);
            }
        } else {
            written.push(partial);
        }
    }
    Ok(written)
}

/// Which column goes on the horizontal axis: the first of t, v, n, r that
/// varies across rows.
fn x_axis(rows: &[Row]) -> (&'static str, fn(&Row) -> Option<f64>) {
    let cols: [(&'static str, fn(&Row) -> Option<f64>); 4] = [
        ("t", |r| r.t),
        ("v", |r| r.v),
        ("n", |r| r.n.map(|n| n as f64)),
        ("r", |r| r.r),
    ];
    for (name, get) in cols {
        let vals: Vec<f64> = rows.iter().filter_map(get).collect();
        if vals.len() == rows.len() && vals.iter().any(|v| *v != vals[0]) {
            return (name, get);
        }
    }
    ("seed", |r| Some(r.seed as f64))
}

/// Line plot of the per-x mean of `risk_mean`, one series per (n, r) pair
/// that is not on the x axis. Log scale on x when all values are positive.
pub fn render_svg(curve: &Curve) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
    let (xname, xget) = x_axis(&curve.rows);
    let rows: Vec<&Row> = curve
        .rows
        .iter()
        .filter(|r| xget(r).is_some_and(f64::is_finite) && r.risk_mean.is_finite())
        .collect();
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in &rows {
        let label = match xname {
            "n" => r.r.map(|v| format!("r={v}")).unwrap_or_default(),
            "r" => r.n.map(|v| format!("n={v}")).unwrap_or_default(),
            _ => format!(
                "{}{}",
                r.n.map(|v| format!("n={v} ")).unwrap_or_default(),
                r.r.map(|v| format!("r={v}")).unwrap_or_default()
            ),
        };
        let x = xget(r).unwrap();
        let entry = match series.iter_mut().find(|(l, _)| *l == label) {
            Some(e) => e,
            None => {
                series.push((label, Vec::new()));
                series.last_mut().unwrap()
            }
        };
        entry.1.push((x, r.risk_mean));
    }
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64, usize)> = Vec::new();
        for &(x, y) in pts.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == x => {
                    last.1 += y;
                    last.2 += 1;
                }
                _ => merged.push((x, y, 1)),
            }
        }
        *pts = merged.into_iter().map(|(x, y, c)| (x, y / c as f64)).collect();
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    let log_x = !all.is_empty() && all.iter().all(|p| p.0 > 0.0);
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(tx(x));
        x1 = x1.max(tx(x));
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| M + (tx(x) - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, curve.name).unwrap();
    writeln!(svg, r##"<line x1="{M}" y1="{b}" x2="{r}" y2="{b}" stroke="#333"/><line x1="{M}" y1="{M}" x2="{M}" y2="{b}" stroke="#333"/>"##, b = H - M, r = W - M).unwrap();
    let xlabel = if log_x { format!("log10 {xname}") } else { xname.to_string() };
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 12.0).unwrap();
    writeln!(svg, r#"<text x="{M}" y="{}" text-anchor="start">{:.3e}</text>"#, M - 6.0, y1).unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="start">{:.3e}</text>"#, M + 4.0, H - M - 4.0, y0).unwrap();
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
        writeln!(svg, r#"<text x="{}" y="{}" fill="{color}">{label}</text>"#, W - M - 90.0, M + 14.0 * i as f64).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_render_with_empty_fields_and_sort() {
        let mut c = Curve::new("x", "test");
        c.rows.push(Row { n: Some(20), t: Some(2.0), risk_mean: 1.0, seed: 1, ..Default::default() });
        c.rows.push(Row { n: Some(10), t: Some(5.0), risk_mean: 0.5, risk_se: Some(0.1), seed: 0, ..Default::default() });
        c.rows.push(Row { n: Some(10), t: Some(1.0), risk_mean: 0.25, seed: 0, ..Default::default() });
        let s = crate::config::Settings::resolve(
            crate::config::Experiment::FlowSweep,
            None,
            &Default::default(),
            None,
        )
        .unwrap();
        let text = c.render(&s);
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], CSV_HEADER);
        assert_eq!(body[1], "10,,1e0,,2.5e-1,,0");
        assert_eq!(body[2], "10,,5e0,,5e-1,1e-1,0");
        assert_eq!(body[3], "20,,2e0,,1e0,,1");
        let svg = render_svg(&c);
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    }
}
