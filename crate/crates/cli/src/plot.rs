//! Log-log line plots of hitting estimates with reference curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use errw_core::io::fmt_f64;
use errw_core::Error;

use crate::output::{write_csv, write_out, Header};

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotFiles {
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 50.0); // left, right, top, bottom
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Writes `<prefix>.csv` with every point of `results` and `overlays`, and
/// `<prefix>.svg` when there is at least one overlay to compare against.
pub fn emit_plot_data(results: &Series, overlays: &[Series], prefix: &Path, header: &Header) -> Result<PlotFiles> {
    if results.points.is_empty() {
        bail!(Error::InvalidParameter("nothing to plot".into()));
    }
    let csv_path = prefix.with_extension("csv");
    let mut csv = String::from("series,x,y\n");
    for s in std::iter::once(results).chain(overlays) {
        for &(x, y) in &s.points {
            let _ = writeln!(csv, "{},{},{}", s.name, fmt_f64(x), fmt_f64(y));
        }
    }
    write_csv(Some(&csv_path), header, &csv)?;
    if overlays.is_empty() {
        return Ok(PlotFiles {
            csv: csv_path,
            svg: None,
        });
    }
    let svg_path = prefix.with_extension("svg");
    write_out(Some(&svg_path), &(header.xml_comment() + &svg(results, overlays)))?;
    Ok(PlotFiles {
        csv: csv_path,
        svg: Some(svg_path),
    })
}

fn log_range(series: &[&Series], pick: impl Fn(&(f64, f64)) -> f64) -> (f64, f64) {
    let logs = series
        .iter()
        .flat_map(|s| s.points.iter())
        .map(pick)
        .filter(|v| *v > 0.0 && v.is_finite())
        .map(f64::log10);
    let (lo, hi) = logs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    (
        lo.floor(),
        if hi.ceil() > lo.floor() {
            hi.ceil()
        } else {
            lo.floor() + 1.0
        },
    )
}

fn svg(results: &Series, overlays: &[Series]) -> String {
    let all: Vec<&Series> = std::iter::once(results).chain(overlays).collect();
    let (x0, x1) = log_range(&all, |p| p.0);
    let (y0, y1) = log_range(&all, |p| p.1);
    let (ml, mr, mt, mb) = MARGIN;
    let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
    let px = |x: f64| ml + (x.log10() - x0) / (x1 - x0) * pw;
    let py = |y: f64| mt + (y1 - y.log10()) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in x0 as i32..=x1 as i32 {
        let x = ml + (k as f64 - x0) / (x1 - x0) * pw;
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{mt}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{k}</text>"##,
            mt + ph,
            mt + ph + 16.0
        );
    }
    for k in y0 as i32..=y1 as i32 {
        let y = mt + (y1 - k as f64) / (y1 - y0) * ph;
        let _ = writeln!(
            s,
            r##"<line x1="{ml}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{k}</text>"##,
            ml + pw,
            ml - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">|ell|_inf</text>"#,
        ml + pw / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(14,{:.2}) rotate(-90)" text-anchor="middle">P(hit before return)</text>"#,
        mt + ph / 2.0
    );

    for (k, series) in all.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let dash = if k == 0 { "" } else { r#" stroke-dasharray="6,3""# };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            pts.join(" ")
        );
        if k == 0 {
            for p in &pts {
                let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = mt + 14.0 + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            ml + pw - 150.0,
            ml + pw - 125.0,
            ml + pw - 120.0,
            ly + 4.0,
            escape(&series.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Header {
        Header::new("simulate", &serde_json::json!({"r": 4}), Some(7)).unwrap()
    }

    fn results() -> Series {
        Series {
            name: "estimate".into(),
            points: vec![(4.0, 0.5), (8.0, 0.3), (12.0, 0.2)],
        }
    }

    #[test]
    fn empty_overlay_writes_csv_only() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(&results(), &[], &dir.path().join("p"), &header()).unwrap();
        assert!(files.svg.is_none());
        let text = std::fs::read_to_string(files.csv).unwrap();
        assert!(text.starts_with("# errw"));
        assert_eq!(text.lines().filter(|l| l.starts_with("estimate,")).count(), 3);
        assert!(!dir.path().join("p.svg").exists());
    }

    #[test]
    fn svg_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let overlay = Series {
            name: "bound".into(),
            points: vec![(4.0, 1.0), (8.0, 0.49), (12.0, 0.33)],
        };
        let a = emit_plot_data(
            &results(),
            std::slice::from_ref(&overlay),
            &dir.path().join("a"),
            &header(),
        )
        .unwrap();
        let b = emit_plot_data(&results(), &[overlay], &dir.path().join("b"), &header()).unwrap();
        let read = |p: &Option<PathBuf>| std::fs::read(p.as_ref().unwrap()).unwrap();
        assert_eq!(read(&a.svg), read(&b.svg));
        assert!(String::from_utf8(read(&a.svg)).unwrap().contains("<polyline"));
    }

    #[test]
    fn empty_results_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let empty = Series {
            name: "estimate".into(),
            points: vec![],
        };
        assert!(emit_plot_data(&empty, &[], &dir.path().join("p"), &header()).is_err());
    }
}
