//! CSV and SVG output.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use super::run::{Results, Row};
use super::spec::{ExperimentSpec, Kind};

pub const CSV_HEADER: [&str; 7] = ["kind", "power_mode", "sweep", "scheme", "statistic", "value", "stderr"];

/// Writes rows in order. Floats use shortest round-trip formatting so the
/// bytes depend only on the values.
pub fn write_csv<W: Write>(rows: &[Row], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record([
            r.kind.as_str(),
            &r.power_mode,
            &r.sweep.to_string(),
            &r.scheme,
            &r.statistic,
            &r.value.to_string(),
            &r.stderr.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> csv::Result<Vec<Row>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> csv::Result<f64> {
            rec[i].parse().map_err(|_| {
                csv::Error::from(io::Error::new(io::ErrorKind::InvalidData, format!("bad number {:?}", &rec[i])))
            })
        };
        rows.push(Row {
            kind: rec[0].to_string(),
            power_mode: rec[1].to_string(),
            sweep: num(2)?,
            scheme: rec[3].to_string(),
            statistic: rec[4].to_string(),
            value: num(5)?,
            stderr: num(6)?,
        });
    }
    Ok(rows)
}

/// Output formats selectable on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

crate::config::keyword_enum!(Format { "csv" => Format::Csv, "svg" => Format::Svg });

/// Writes `<dir>/<stem>.<ext>` for each format and returns the paths.
pub fn emit(results: &Results, spec: &ExperimentSpec, dir: &Path, formats: &[Format]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stem = spec.file_stem();
    let mut paths = Vec::new();
    for f in formats {
        let path = match f {
            Format::Csv => {
                let p = dir.join(format!("{stem}.csv"));
                write_csv(&results.rows, fs::File::create(&p)?).map_err(io::Error::other)?;
                p
            }
            Format::Svg => {
                let p = dir.join(format!("{stem}.svg"));
                fs::write(&p, svg(results))?;
                p
            }
        };
        paths.push(path);
    }
    Ok(paths)
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// A plotted series: label and `(x, y, error)` points.
struct Series {
    label: String,
    pts: Vec<(f64, f64, f64)>,
    step: bool,
}

fn series(results: &Results) -> (Vec<Series>, &'static str, &'static str) {
    let rows = &results.rows;
    let mut keys: Vec<(String, String, f64)> = Vec::new();
    let mut out = Vec::new();
    match results.kind {
        Kind::LosPmf => {
            for r in rows.iter().filter(|r| r.statistic.starts_with("pmf[")) {
                if !keys.iter().any(|k| k.2 == r.sweep) {
                    keys.push((String::new(), String::new(), r.sweep));
                }
            }
            for (_, _, m) in keys {
                let pts = rows
                    .iter()
                    .filter(|r| r.sweep == m && r.statistic.starts_with("pmf["))
                    .map(|r| {
                        let c: f64 = r.statistic[4..r.statistic.len() - 1].parse().unwrap_or(f64::NAN);
                        (c, r.value, r.stderr)
                    })
                    .collect();
                out.push(Series { label: format!("M={m}"), pts, step: false });
            }
            (out, "LoS links per UE", "probability")
        }
        Kind::RateCdf => {
            for r in rows.iter().filter(|r| r.statistic == "sample") {
                let k = (r.power_mode.clone(), r.scheme.clone(), r.sweep);
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
            for (mode, scheme, m) in keys {
                let s: Vec<f64> = results.series(&mode, m, &scheme, "sample");
                let n = s.len() as f64;
                let pts = s.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / n, 0.0)).collect();
                out.push(Series { label: format!("{scheme} {mode} M={m}"), pts, step: true });
            }
            (out, "rate (bit per channel use)", "CDF")
        }
        Kind::RateVsSnr | Kind::RateVsDensity => {
            for r in rows.iter().filter(|r| r.statistic == "bound_mean") {
                let k = (r.power_mode.clone(), r.scheme.clone(), 0.0);
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
            for (mode, scheme, _) in keys {
                for stat in ["bound_mean", "mc_mean"] {
                    let pts = rows
                        .iter()
                        .filter(|r| r.power_mode == mode && r.scheme == scheme && r.statistic == stat)
                        .map(|r| (r.sweep, r.value, r.stderr))
                        .collect();
                    let tag = if stat == "bound_mean" { "bound" } else { "MC" };
                    out.push(Series { label: format!("{scheme} {mode} {tag}"), pts, step: false });
                }
            }
            let x = if results.kind == Kind::RateVsSnr { "SNR (dB)" } else { "number of APs" };
            (out, x, "mean rate (bit per channel use)")
        }
    }
}

/// Minimal line plot of the main statistic of each series with ±1 stderr bars.
pub fn svg(results: &Results) -> String {
    let (ser, xl, yl) = series(results);
    let all = ser.iter().flat_map(|s| s.pts.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y, e) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y - e);
        y1 = y1.max(y + e);
    }
    // Degenerate or empty ranges (including NaN from no points) get unit width.
    if x1.partial_cmp(&x0) != Some(std::cmp::Ordering::Greater) {
        x0 = if x0.is_finite() { x0 - 0.5 } else { 0.0 };
        x1 = x0 + 1.0;
    }
    if y1.partial_cmp(&y0) != Some(std::cmp::Ordering::Greater) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    );
    for (v, at) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(s, r#"<text x="{at:.1}" y="{}" text-anchor="middle">{}</text>"#, H - PAD + 14.0, fmt_tick(v));
    }
    for (v, at) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(s, r#"<text x="{}" y="{at:.1}" text-anchor="end">{}</text>"#, PAD - 4.0, fmt_tick(v));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, xl);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        yl
    );
    for (i, se) in ser.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let dash = if se.label.ends_with(" MC") { r#" stroke-dasharray="4 3""# } else { "" };
        let mut d = String::new();
        let mut prev_y = y0;
        for (j, &(x, y, _)) in se.pts.iter().enumerate() {
            let cmd = if j == 0 { 'M' } else { 'L' };
            if se.step && j > 0 {
                let _ = write!(d, "L{:.1} {:.1} ", sx(x), sy(prev_y));
            }
            let _ = write!(d, "{cmd}{:.1} {:.1} ", sx(x), sy(y));
            prev_y = y;
        }
        let _ = writeln!(s, r#"<path d="{}" stroke="{c}" fill="none"{dash}/>"#, d.trim_end());
        for &(x, y, e) in se.pts.iter().filter(|p| p.2 > 0.0) {
            let _ = writeln!(
                s,
                r#"<line x1="{0:.1}" x2="{0:.1}" y1="{1:.1}" y2="{2:.1}" stroke="{c}"/>"#,
                sx(x),
                sy(y - e),
                sy(y + e)
            );
        }
        let ly = PAD + 14.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly:.1}" fill="{c}">{}</text>"#, W - PAD - 150.0, se.label);
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}
