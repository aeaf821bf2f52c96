//! Artifact files.

use std::fmt::Write;
use std::path::Path;

use crate::summary::RunSummary;
use crate::{Error, Result};

pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| Error::io(path, e))
}

fn rate_color(rate: f64) -> String {
    // red at 0, green at 1
    let r = (255.0 * (1.0 - rate)).round() as u8;
    let g = (200.0 * rate).round() as u8;
    format!("rgb({r},{g},60)")
}

/// Success-rate heatmap of a push sweep, one panel per group, `F_x`
/// horizontal and `F_y` vertical.
pub fn heatmap_svg(summary: &RunSummary) -> String {
    let (cell, margin, gap) = (28.0, 48.0, 40.0);
    let panels: Vec<_> = summary.groups.iter().filter(|g| !g.cells.is_empty()).collect();
    let mut xs: Vec<f64> = panels.iter().flat_map(|g| g.cells.iter().map(|c| c.fx)).collect();
    let mut ys: Vec<f64> = panels.iter().flat_map(|g| g.cells.iter().map(|c| c.fy)).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let pw = xs.len() as f64 * cell;
    let ph = ys.len() as f64 * cell;
    let width = margin + panels.len() as f64 * (pw + gap);
    let height = ph + 2.0 * margin;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#);
    for (k, g) in panels.iter().enumerate() {
        let x0 = margin + k as f64 * (pw + gap);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{} ({}/{})</text>"#, x0 + pw / 2.0, margin - 20.0, g.name, g.successes, g.episodes);
        for c in &g.cells {
            let i = xs.iter().position(|&x| x == c.fx).unwrap_or(0) as f64;
            let j = ys.iter().position(|&y| y == c.fy).unwrap_or(0) as f64;
            let y = margin + ph - (j + 1.0) * cell;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{y}" width="{cell}" height="{cell}" fill="{}" stroke="white"><title>Fx {} Fy {}: {}/{}</title></rect>"#,
                x0 + i * cell,
                rate_color(c.success_rate),
                c.fx,
                c.fy,
                c.successes,
                c.trials
            );
        }
        for (i, x) in xs.iter().enumerate() {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="7">{x}</text>"#, x0 + (i as f64 + 0.5) * cell, margin + ph + 12.0);
        }
        for (j, y) in ys.iter().enumerate() {
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="7">{y}</text>"#, x0 - 3.0, margin + ph - (j as f64 + 0.5) * cell + 3.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">F_x [N]</text>"#, x0 + pw / 2.0, margin + ph + 28.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">F_y [N], scale {}</text>"#, 4.0, margin - 6.0, summary.scale);
    s.push_str("</svg>\n");
    s
}
