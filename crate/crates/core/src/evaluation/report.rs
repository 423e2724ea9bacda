use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EvalReport, GLOBAL_CATEGORY, METRIC_RMS_ANGLE};
use crate::error::{Error, Result};

pub const REPORT_FILE: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_SVG: &str = "summary.svg";

const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// Writes `report.csv`, `summary.csv` and `summary.svg` into `dir`.
/// Values use the shortest representation that round-trips.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut rows = String::from("shape,stem,category,method,metric,value\n");
    for r in &report.records {
        for (metric, value) in r.metrics() {
            let _ = writeln!(
                rows,
                "{},{},{},{},{metric},{value}",
                csv_field(&r.shape),
                csv_field(&r.stem),
                csv_field(&r.category),
                csv_field(&r.method)
            );
        }
    }
    let mut summary = String::from("method,category,metric,value,shapes\n");
    for s in &report.summary {
        let _ = writeln!(
            summary,
            "{},{},{},{},{}",
            csv_field(&s.method),
            csv_field(&s.category),
            s.metric,
            s.value,
            s.shapes
        );
    }
    for (name, text) in [(REPORT_FILE, rows), (SUMMARY_FILE, summary), (SUMMARY_SVG, render_svg(report))] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    Ok(())
}

/// Grouped bar chart of the RMS angle error per category and method.
pub fn render_svg(report: &EvalReport) -> String {
    let rows: Vec<_> = report.summary.iter().filter(|r| r.metric == METRIC_RMS_ANGLE).collect();
    let mut categories: Vec<&str> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    for r in &rows {
        if !categories.contains(&r.category.as_str()) {
            categories.push(&r.category);
        }
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    if let Some(pos) = categories.iter().position(|c| *c == GLOBAL_CATEGORY) {
        let g = categories.remove(pos);
        categories.push(g);
    }
    let max = rows.iter().map(|r| r.value).fold(0.0, f64::max).max(1.0);
    let (left, top, plot_h, bar_w, gap) = (60.0, 30.0, 240.0, 16.0, 24.0);
    let group_w = bar_w * methods.len().max(1) as f64 + gap;
    let width = left + group_w * categories.len().max(1) as f64 + 20.0;
    let legend_y = top + plot_h + 40.0;
    let height = legend_y + 18.0 * methods.len() as f64 + 10.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="18">RMS normal angle error (degrees)</text>"#);
    let base = top + plot_h;
    for tick in 0..=4 {
        let v = max * tick as f64 / 4.0;
        let y = base - plot_h * tick as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"##,
            width - 20.0,
            left - 4.0,
            y + 4.0
        );
    }
    for (ci, cat) in categories.iter().enumerate() {
        let x0 = left + gap / 2.0 + group_w * ci as f64;
        for (mi, method) in methods.iter().enumerate() {
            let Some(r) = rows.iter().find(|r| r.category == *cat && r.method == *method) else { continue };
            let h = plot_h * r.value / max;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{bar_w}" height="{h:.1}" fill="{}"><title>{}: {:.3}</title></rect>"#,
                x0 + bar_w * mi as f64,
                base - h,
                PALETTE[mi % PALETTE.len()],
                escape(&format!("{method} / {cat}")),
                r.value
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + bar_w * methods.len() as f64 / 2.0,
            base + 16.0,
            escape(cat)
        );
    }
    let _ = writeln!(s, r#"<line x1="{left}" y1="{base}" x2="{:.1}" y2="{base}" stroke="black"/>"#, width - 20.0);
    for (mi, method) in methods.iter().enumerate() {
        let y = legend_y + 18.0 * mi as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 10.0,
            PALETTE[mi % PALETTE.len()],
            left + 18.0,
            y,
            escape(method)
        );
    }
    s.push_str("</svg>\n");
    s
}
