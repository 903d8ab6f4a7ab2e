//! CSV and SVG writers with a provenance header.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip decimal representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn config_hash(json: &str) -> String {
    hex::encode(Sha256::digest(json.as_bytes()))
}

pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: &str, columns: Vec<String>) -> Self {
        Table {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    /// Numeric column `k`, unparsable cells as NaN.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k].parse().unwrap_or(f64::NAN)).collect()
    }
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl Plot {
    /// One series per listed column of `t`, against column `x`.
    pub fn from_table(t: &Table, title: &str, x: usize, ys: &[usize]) -> Self {
        let xs = t.column(x);
        let series = ys
            .iter()
            .map(|&k| Series {
                label: t.columns[k].clone(),
                points: xs.iter().copied().zip(t.column(k)).collect(),
            })
            .collect();
        Plot {
            title: title.to_string(),
            x_label: t.columns[x].clone(),
            y_label: String::new(),
            series,
        }
    }
}

pub struct Emitter {
    dir: PathBuf,
    svg: bool,
    prefix: String,
    header: String,
    written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: &Path, svg: bool, prefix: &str, config: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let json = config.to_json();
        let mut header = String::new();
        let _ = writeln!(header, "# para-ep {VERSION}");
        let _ = writeln!(header, "# experiment: {}", config.experiment);
        let _ = writeln!(header, "# config_sha256: {}", config_hash(&json));
        let _ = writeln!(header, "# seed: {}", config.seed);
        let _ = writeln!(header, "# config: {json}");
        Ok(Emitter {
            dir: dir.to_path_buf(),
            svg,
            prefix: prefix.to_string(),
            header,
            written: Vec::new(),
        })
    }

    pub fn svg_enabled(&self) -> bool {
        self.svg
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn path(&self, name: &str, ext: &str) -> PathBuf {
        if self.prefix.is_empty() {
            self.dir.join(format!("{name}.{ext}"))
        } else {
            self.dir.join(format!("{}_{name}.{ext}", self.prefix))
        }
    }

    pub fn csv(&mut self, t: &Table) -> Result<(), CliError> {
        let mut s = self.header.clone();
        s.push_str(&t.columns.join(","));
        s.push('\n');
        for row in &t.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        let path = self.path(&t.name, "csv");
        fs::write(&path, s).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// Writes the plot only when SVG output was requested.
    pub fn plot(&mut self, name: &str, p: &Plot) -> Result<(), CliError> {
        if !self.svg {
            return Ok(());
        }
        let path = self.path(name, "svg");
        let mut body = String::new();
        for line in self.header.lines() {
            let _ = writeln!(body, "<!-- {} -->", line.trim_start_matches("# ").replace("--", "- -"));
        }
        body.push_str(&render_svg(p));
        fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(p: &Plot) -> String {
    let (w, h) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 130.0, 30.0, 50.0);
    let finite = p.series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
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
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, ml + pw / 2.0, escape(&p.title));
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let (px, py) = (sx(fx), sy(fy));
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/>"#, mt + ph, mt + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" font-size="11" text-anchor="middle">{}</text>"#, mt + ph + 18.0, tick(fx));
        let _ = writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{ml}" y2="{py:.2}" stroke="black"/>"#, ml - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#, ml - 8.0, py + 4.0, tick(fy));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#, ml + pw / 2.0, h - 10.0, escape(&p.x_label));
    if !p.y_label.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="15" y="{0}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {0})">{1}</text>"#,
            mt + ph / 2.0,
            escape(&p.y_label)
        );
    }
    for (k, series) in p.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, s: &mut String| {
            if run.len() > 1 {
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, run.join(" "));
            }
            run.clear();
        };
        for &(x, y) in &series.points {
            if x.is_finite() && y.is_finite() {
                run.push(format!("{:.2},{:.2}", sx(x), sy(y)));
            } else {
                flush(&mut run, &mut s);
            }
        }
        flush(&mut run, &mut s);
        let ly = mt + 15.0 + 18.0 * k as f64;
        let lx = ml + pw + 10.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, lx + 25.0, ly + 4.0, escape(&series.label));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn svg_is_well_formed() {
        let p = Plot {
            title: "a < b".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                label: "s".into(),
                points: vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0), (3.0, 4.0)],
            }],
        };
        let s = render_svg(&p);
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
        assert_eq!(s.matches("<polyline").count(), 1);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
