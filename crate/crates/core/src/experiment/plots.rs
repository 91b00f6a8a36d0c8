use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::battery::ResultsRecord;
use crate::error::{Error, Result};
use crate::metrics::EntropyHistogram;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

struct Frame {
    x_max: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + v / self.x_max * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - v / self.y_max * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open_svg(title: &str, x_label: &str, y_label: &str, f: &Frame) -> String {
    let mut s = String::new();
    let (w, h, m) = (WIDTH, HEIGHT, MARGIN);
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0).unwrap();
    writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m).unwrap();
    writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, w / 2.0, h - 12.0).unwrap();
    writeln!(s, r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#, h / 2.0, h / 2.0).unwrap();
    for k in 0..=4 {
        let fx = f.x_max * k as f64 / 4.0;
        let fy = f.y_max * k as f64 / 4.0;
        writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, f.x(fx), h - m + 16.0, tick(fx)).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, m - 4.0, f.y(fy) + 4.0, tick(fy)).unwrap();
    }
    s
}

fn tick(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e6 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn polyline(s: &mut String, f: &Frame, points: &[(f64, f64)], colour: &str) {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{:.2},{:.2}", f.x(*x), f.y(*y))).collect();
    writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, pts.join(" ")).unwrap();
}

fn legend(s: &mut String, entries: &[(&str, &str)]) {
    for (i, (name, colour)) in entries.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{colour}"/>"#, WIDTH - MARGIN - 110.0, y - 9.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{y}">{name}</text>"#, WIDTH - MARGIN - 95.0).unwrap();
    }
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn histogram_files(h: &EntropyHistogram, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let edges = h.edges();
    let step = h.upper / h.real.len() as f64;
    let mut tsv = String::from("bin_lower\tbin_upper\treal\tsynthetic\n");
    for (i, lo) in edges.iter().enumerate() {
        writeln!(tsv, "{lo}\t{}\t{}\t{}", lo + step, h.real[i], h.synthetic[i]).unwrap();
    }
    write(dir.join("entropy_histogram.tsv"), &tsv, written)?;

    let y_max = h.real.iter().chain(&h.synthetic).copied().max().unwrap_or(0).max(1) as f64;
    let f = Frame { x_max: h.upper, y_max };
    let mut svg = open_svg("Prediction entropy by provenance", "entropy", "count", &f);
    let bar = (f.x(step) - f.x(0.0)) / 2.0;
    for (i, lo) in edges.iter().enumerate() {
        for (k, (count, colour)) in [(h.real[i], "steelblue"), (h.synthetic[i], "darkorange")].into_iter().enumerate() {
            let top = f.y(count as f64);
            writeln!(
                svg,
                r#"<rect x="{:.2}" y="{top:.2}" width="{bar:.2}" height="{:.2}" fill="{colour}"/>"#,
                f.x(*lo) + k as f64 * bar,
                f.y(0.0) - top
            )
            .unwrap();
        }
    }
    legend(&mut svg, &[("real", "steelblue"), ("synthetic", "darkorange")]);
    svg.push_str("</svg>\n");
    write(dir.join("entropy_histogram.svg"), &svg, written)
}

/// Writes columnar data (`.tsv`) and a rendered chart (`.svg`) for the
/// entropy histogram, the buffer's synthetic fraction over iterations and
/// the entropy ROC curve. A chart whose data is missing from `record` is
/// skipped with a warning. Existing files are overwritten.
pub fn emit_plots(record: &ResultsRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let runs: Vec<_> = record.runs.iter().filter_map(|r| r.metrics.as_ref().map(|m| (r.seed, m))).collect();

    let mut pooled: Option<EntropyHistogram> = None;
    for (_, m) in &runs {
        match &mut pooled {
            Some(h) => h.merge(&m.diagnostics.histogram),
            None => pooled = Some(m.diagnostics.histogram.clone()),
        }
    }
    match pooled {
        Some(h) => histogram_files(&h, dir, &mut written)?,
        None => log::warn!("no entropy histogram in the results; skipping"),
    }

    let curve = &record.aggregate.composition;
    if curve.is_empty() {
        log::warn!("no buffer composition trajectory in the results; skipping");
    } else {
        let mut tsv = String::from("iteration\tsynthetic_fraction\n");
        for (it, frac) in curve {
            writeln!(tsv, "{it}\t{frac}").unwrap();
        }
        write(dir.join("composition.tsv"), &tsv, &mut written)?;
        let f = Frame { x_max: curve.last().map_or(1, |c| c.0).max(1) as f64, y_max: 1.0 };
        let mut svg = open_svg("Synthetic fraction of the buffer", "iteration", "synthetic fraction", &f);
        let pts: Vec<(f64, f64)> = curve.iter().map(|(i, v)| (*i as f64, *v)).collect();
        polyline(&mut svg, &f, &pts, "darkorange");
        svg.push_str("</svg>\n");
        write(dir.join("composition.svg"), &svg, &mut written)?;
    }

    let rocs: Vec<(u64, f64, &Vec<(f64, f64)>)> = runs
        .iter()
        .filter_map(|(seed, m)| Some((*seed, m.diagnostics.auc?, m.diagnostics.roc.as_ref()?)))
        .collect();
    if rocs.is_empty() {
        log::warn!("no ROC data in the results; skipping");
    } else {
        let mut tsv = String::from("seed\tfpr\ttpr\n");
        let f = Frame { x_max: 1.0, y_max: 1.0 };
        let mut svg = open_svg("Entropy ROC (real = positive)", "false positive rate", "true positive rate", &f);
        polyline(&mut svg, &f, &[(0.0, 0.0), (1.0, 1.0)], "lightgray");
        let palette = ["steelblue", "darkorange", "seagreen", "firebrick", "purple"];
        let mut entries = Vec::new();
        for (k, (seed, auc, roc)) in rocs.iter().enumerate() {
            for (x, y) in roc.iter() {
                writeln!(tsv, "{seed}\t{x}\t{y}").unwrap();
            }
            let colour = palette[k % palette.len()];
            polyline(&mut svg, &f, roc, colour);
            entries.push((format!("seed {seed}: {auc:.3}"), colour));
        }
        let entries: Vec<(&str, &str)> = entries.iter().map(|(n, c)| (n.as_str(), *c)).collect();
        legend(&mut svg, &entries);
        svg.push_str("</svg>\n");
        write(dir.join("roc.tsv"), &tsv, &mut written)?;
        write(dir.join("roc.svg"), &svg, &mut written)?;
    }
    Ok(written)
}
