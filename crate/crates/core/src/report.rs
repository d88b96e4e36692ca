//! CSV tables and log-log SVG plots of experiment summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::BoundsRow;
use crate::error::{Error, Result};
use crate::experiment::SummaryRow;

#[derive(Serialize, Deserialize)]
struct SummaryCsv {
    experiment: String,
    variant: String,
    #[serde(rename = "N")]
    n: usize,
    rmse_mean: f64,
    rmse_std: f64,
    time_mean_s: f64,
    time_std_s: f64,
    lik_evals_mean: f64,
    speedup_vs_sir: f64,
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::invalid("results", "nothing to write"));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for r in rows {
        w.serialize(SummaryCsv {
            experiment: r.experiment.clone(),
            variant: r.variant.clone(),
            n: r.n_particles,
            rmse_mean: r.rmse_mean,
            rmse_std: r.rmse_std,
            time_mean_s: r.time_mean_s,
            time_std_s: r.time_std_s,
            lik_evals_mean: r.lik_evals_mean,
            speedup_vs_sir: r.speedup_vs_sir,
        })
        .map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    r.deserialize::<SummaryCsv>()
        .map(|row| {
            let c = row.map_err(|e| Error::format(path, e.to_string()))?;
            Ok(SummaryRow {
                experiment: c.experiment,
                variant: c.variant,
                n_particles: c.n,
                rmse_mean: c.rmse_mean,
                rmse_std: c.rmse_std,
                time_mean_s: c.time_mean_s,
                time_std_s: c.time_std_s,
                lik_evals_mean: c.lik_evals_mean,
                speedup_vs_sir: c.speedup_vs_sir,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct BoundsCsv<'a> {
    field: &'a str,
    cell_size: f64,
    true_error: f64,
    rect_bound: f64,
    square_bound: f64,
}

pub fn write_bounds_csv(path: &Path, rows: &[BoundsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for r in rows {
        w.serialize(BoundsCsv {
            field: &r.field,
            cell_size: r.cell_size,
            true_error: r.true_error,
            rect_bound: r.rect_bound,
            square_bound: r.square_bound,
        })
        .map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];
const MARKERS: [&str; 3] = ["circle", "cross", "triangle"];
const W: f64 = 560.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// A named series of `(x, y)` points; non-positive or non-finite points are skipped on log axes.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn decades(lo: f64, hi: f64) -> (f64, f64) {
    let (a, mut b) = (lo.log10().floor(), hi.log10().ceil());
    if b <= a {
        b = a + 1.0;
    }
    (a, b)
}

fn marker(kind: &str, x: f64, y: f64, color: &str) -> String {
    match kind {
        "cross" => format!(
            "<path d=\"M{:.1} {:.1}L{:.1} {:.1}M{:.1} {:.1}L{:.1} {:.1}\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            x - 4.0, y - 4.0, x + 4.0, y + 4.0, x - 4.0, y + 4.0, x + 4.0, y - 4.0
        ),
        "triangle" => format!(
            "<path d=\"M{:.1} {:.1}L{:.1} {:.1}L{:.1} {:.1}Z\" fill=\"none\" stroke=\"{color}\"/>",
            x, y + 4.5, x - 4.5, y - 3.5, x + 4.5, y - 3.5
        ),
        _ => format!("<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"4\" fill=\"none\" stroke=\"{color}\"/>"),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-log line plot with decade gridlines and a legend.
pub fn loglog_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let ok = |&(x, y): &(f64, f64)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite();
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied().filter(ok)).collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(svg, "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>", W / 2.0, escape(title));
    if pts.is_empty() {
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">no data</text>\n</svg>", W / 2.0, H / 2.0);
        return svg;
    }
    let fold = |f: fn(&(f64, f64)) -> f64, init: f64, m: fn(f64, f64) -> f64| pts.iter().map(f).fold(init, m);
    let (x0, x1) = decades(fold(|p| p.0, f64::INFINITY, f64::min), fold(|p| p.0, 0.0, f64::max));
    let (y0, y1) = decades(fold(|p| p.1, f64::INFINITY, f64::min), fold(|p| p.1, 0.0, f64::max));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + ph - (y.log10() - y0) / (y1 - y0) * ph;

    for d in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(d));
        let _ = writeln!(svg, "<line x1=\"{x:.1}\" y1=\"{TOP}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>", TOP + ph);
        let _ = writeln!(svg, "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">1e{d}</text>", TOP + ph + 16.0);
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(d));
        let _ = writeln!(svg, "<line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>", LEFT + pw);
        let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{d}</text>", LEFT - 6.0, y + 4.0);
    }
    let _ = writeln!(svg, "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>");
    let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", LEFT + pw / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        svg,
        "<text transform=\"translate(16 {:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let shape = MARKERS[i % MARKERS.len()];
        let p: Vec<(f64, f64)> = s.points.iter().copied().filter(ok).map(|(x, y)| (px(x), py(y))).collect();
        if p.len() > 1 {
            let path: Vec<String> = p.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(svg, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\"/>", path.join(" "));
        }
        for &(x, y) in &p {
            let _ = writeln!(svg, "{}", marker(shape, x, y, color));
        }
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let _ = writeln!(svg, "{}", marker(shape, LEFT + 14.0, ly - 4.0, color));
        let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{ly:.1}\">{}</text>", LEFT + 24.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

fn series_by_variant(rows: &[SummaryRow], value: fn(&SummaryRow) -> f64) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for r in rows {
        let pt = (r.n_particles as f64, value(r));
        match out.iter_mut().find(|s| s.label == r.variant) {
            Some(s) => s.points.push(pt),
            None => out.push(Series { label: r.variant.clone(), points: vec![pt] }),
        }
    }
    out
}

/// Time, speedup and RMSE against N, one file each per experiment in `rows`.
pub fn write_plots(dir: &Path, rows: &[SummaryRow]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut experiments: Vec<&str> = Vec::new();
    for r in rows {
        if !experiments.contains(&r.experiment.as_str()) {
            experiments.push(&r.experiment);
        }
    }
    type Plot = (&'static str, &'static str, fn(&SummaryRow) -> f64);
    let plots: [Plot; 3] = [
        ("time", "time per run [s]", |r| r.time_mean_s),
        ("speedup", "speedup over SIR", |r| r.speedup_vs_sir),
        ("rmse", "RMSE [px]", |r| r.rmse_mean),
    ];
    let mut written = Vec::new();
    for exp in experiments {
        let sub: Vec<SummaryRow> = rows.iter().filter(|r| r.experiment == exp).cloned().collect();
        for (name, label, f) in plots {
            let path = dir.join(format!("{exp}_{name}.svg"));
            let svg = loglog_svg(&format!("{exp}: {label}"), "number of particles N", label, &series_by_variant(&sub, f));
            fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<SummaryRow> {
        let mk = |v: &str, n: usize, t: f64, s: f64| SummaryRow {
            experiment: "large_object".into(),
            variant: v.into(),
            n_particles: n,
            rmse_mean: 0.123456789012345,
            rmse_std: 0.01,
            time_mean_s: t,
            time_std_s: t / 10.0,
            lik_evals_mean: n as f64 * 49.0,
            speedup_vs_sir: s,
        };
        vec![
            mk("SIR", 100, 0.5, 1.0),
            mk("SIR", 200, 1.0, 1.0),
            mk("pcSIR-1x1-CoM", 100, 0.05, 10.0),
            mk("pcSIR-1x1-CoM", 200, 0.07, 1.0 / 0.07),
            mk("pcSIR-2x2-CoM", 100, f64::NAN, f64::NAN),
        ]
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_summary_csv(&p, &rows()).unwrap();
        let back = read_summary_csv(&p).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in rows().iter().zip(&back) {
            assert_eq!((&a.experiment, &a.variant, a.n_particles), (&b.experiment, &b.variant, b.n_particles));
            for (x, y) in [(a.rmse_mean, b.rmse_mean), (a.time_mean_s, b.time_mean_s), (a.speedup_vs_sir, b.speedup_vs_sir)] {
                assert!((x - y).abs() <= 1e-9 || (x.is_nan() && y.is_nan()));
            }
        }
        let header = fs::read_to_string(&p).unwrap();
        assert!(header.starts_with(
            "experiment,variant,N,rmse_mean,rmse_std,time_mean_s,time_std_s,lik_evals_mean,speedup_vs_sir\n"
        ));
    }

    #[test]
    fn empty_results_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_summary_csv(&dir.path().join("x.csv"), &[]).is_err());
    }

    #[test]
    fn plots_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_plots(dir.path(), &rows()).unwrap();
        assert_eq!(files.len(), 3);
        let svg = fs::read_to_string(&files[0]).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("pcSIR-1x1-CoM") && svg.contains("<polyline"));
    }

    #[test]
    fn svg_without_positive_data() {
        let s = loglog_svg("t", "x", "y", &[Series { label: "a".into(), points: vec![(0.0, 1.0)] }]);
        assert!(s.contains("no data"));
    }
}
