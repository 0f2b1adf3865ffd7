use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::{BenchmarkReport, CellFailure, RepeatabilityRecord, RunMeta};
use super::synth::ConditionFamily;
use crate::detect::format_sig;
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 12] = [
    "family",
    "parameter",
    "detector",
    "descriptor",
    "resolution",
    "n_kp_ref",
    "n_kp_test",
    "n_correspondences",
    "repeatability",
    "n_matches",
    "n_correct",
    "runtime_ms",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn write_csv(path: &Path, records: &[RepeatabilityRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        w.write_record([
            r.family.tag().to_string(),
            r.parameter.clone(),
            r.detector.tag().to_string(),
            r.descriptor.tag().to_string(),
            format_sig(r.resolution, 6),
            r.n_kp_ref.to_string(),
            r.n_kp_test.to_string(),
            opt(r.n_correspondences),
            opt(r.repeatability.map(|v| format_sig(v, 6))),
            r.n_matches.to_string(),
            opt(r.n_correct),
            opt(r.runtime_ms.map(|v| format!("{v:.3}"))),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct MetaFile<'a> {
    #[serde(flatten)]
    meta: &'a RunMeta,
    failures: &'a [CellFailure],
}

/// Writes `results.csv`, `run_meta.json` and one `<family>.svg` chart per
/// family present in the report. Returns the written paths.
pub fn write_report(report: &BenchmarkReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let csv_path = out_dir.join("results.csv");
    write_csv(&csv_path, &report.records)?;
    written.push(csv_path);

    let meta_path = out_dir.join("run_meta.json");
    let meta = serde_json::to_string_pretty(&MetaFile {
        meta: &report.meta,
        failures: &report.failures,
    })
    .expect("run metadata serializes");
    fs::write(&meta_path, meta + "\n").map_err(|e| Error::io(&meta_path, e))?;
    written.push(meta_path);

    let mut families: Vec<ConditionFamily> = report.records.iter().map(|r| r.family).collect();
    families.sort();
    families.dedup();
    for f in families {
        let rows: Vec<&RepeatabilityRecord> = report.records.iter().filter(|r| r.family == f).collect();
        let path = out_dir.join(format!("{}.svg", f.tag()));
        fs::write(&path, render_chart(f, &rows)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

const PALETTE: [&str; 16] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#ad494a", "#637939", "#8c6d31", "#7b4173", "#3182bd",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Line chart of one family at the finest resolution present. The y value
/// is repeatability when every row has it, the match count otherwise.
fn render_chart(family: ConditionFamily, rows: &[&RepeatabilityRecord]) -> String {
    let finest = rows.iter().map(|r| r.resolution).fold(f64::NEG_INFINITY, f64::max);
    let rows: Vec<&RepeatabilityRecord> = rows.iter().copied().filter(|r| r.resolution == finest).collect();
    let use_rep = rows.iter().all(|r| r.repeatability.is_some());
    let y_of = |r: &RepeatabilityRecord| {
        if use_rep {
            r.repeatability.unwrap_or(0.0)
        } else {
            r.n_matches as f64
        }
    };

    // Conditions in report order; numeric x when every condition has a value.
    let mut conds: Vec<(&str, Option<f64>)> = Vec::new();
    for r in &rows {
        if !conds.iter().any(|c| c.0 == r.parameter) {
            conds.push((&r.parameter, r.value));
        }
    }
    let numeric = conds.iter().all(|c| c.1.is_some());
    let x_of = |label: &str| {
        let i = conds.iter().position(|c| c.0 == label).unwrap_or(0);
        if numeric {
            conds[i].1.unwrap_or(0.0)
        } else {
            i as f64
        }
    };
    let (x_lo, x_hi) = conds
        .iter()
        .map(|c| x_of(c.0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (x_lo, x_hi) = if x_hi > x_lo {
        (x_lo, x_hi)
    } else {
        (x_lo - 1.0, x_lo + 1.0)
    };
    let y_hi = if use_rep {
        1.0
    } else {
        rows.iter().map(|r| y_of(r)).fold(1.0, f64::max)
    };

    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in &rows {
        let name = format!("{}+{}", r.detector, r.descriptor);
        let pt = (x_of(&r.parameter), y_of(r));
        match series.iter_mut().find(|s| s.0 == name) {
            Some(s) => s.1.push(pt),
            None => series.push((name, vec![pt])),
        }
    }
    for s in &mut series {
        s.1.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let (w, h) = (860.0, 460.0);
    let (left, right, top, bottom) = (64.0, 640.0, 44.0, 400.0);
    let px = |x: f64| left + (x - x_lo) / (x_hi - x_lo) * (right - left);
    let py = |y: f64| bottom - y / y_hi * (bottom - top);

    let mut title = format!("{family}");
    if family == ConditionFamily::Viewpoint {
        title.push_str(" (synthetic pinhole warp)");
    }
    title.push_str(&format!(", resolution {}", format_sig(finest, 6)));
    let y_label = if use_rep { "repeatability" } else { "matches" };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (left + right) / 2.0,
        esc(&title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top}V{bottom}H{right}" fill="none" stroke="black"/>"#
    );
    for k in 0..=5 {
        let y = y_hi * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{0:.1}" x2="{right}" y2="{0:.1}" stroke="#ddd"/><text x="{1}" y="{2:.1}" text-anchor="end">{3}</text>"##,
            py(y),
            left - 6.0,
            py(y) + 4.0,
            format_sig(y, 3)
        );
    }
    for c in &conds {
        let x = px(x_of(c.0));
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#,
            bottom + 18.0,
            esc(c.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        bottom + 42.0,
        esc(family.tag())
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (top + bottom) / 2.0,
        y_label
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| format!("{}{:.1} {:.1}", if k == 0 { 'M' } else { 'L' }, px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.join("")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="2"/><text x="{3}" y="{4}">{5}</text>"#,
            right + 20.0,
            ly,
            right + 40.0,
            right + 46.0,
            ly + 4.0,
            esc(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
