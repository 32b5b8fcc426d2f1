//! Minimal standalone SVG rendering: heatmaps and a stacked share chart.

use std::fmt::Write as _;

use crate::linalg::Matrix;

const CELL: f64 = 18.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;

/// Color range of a heatmap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColorScale {
    /// `[−limit, limit]` for every cell.
    Fixed(f64),
    /// Each row on its own `[−max|row|, max|row|]`.
    PerRow,
}

/// Blue at −1, white at 0, red at +1.
pub fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn heatmap(m: &Matrix, row_labels: &[String], col_labels: &[String], scale: ColorScale, title: &str) -> String {
    let (rows, cols) = m.shape();
    let width = MARGIN_LEFT + cols as f64 * CELL + 20.0;
    let height = MARGIN_TOP + rows as f64 * CELL + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="9">"#
    );
    let _ = writeln!(s, r#"<text x="4" y="14" font-size="12">{}</text>"#, escape(title));
    for i in 0..rows {
        let limit = match scale {
            ColorScale::Fixed(l) => l,
            ColorScale::PerRow => m.row(i).amax(),
        };
        let y = MARGIN_TOP + i as f64 * CELL;
        if let Some(l) = row_labels.get(i) {
            let _ = writeln!(s, r#"<text x="4" y="{:.1}">{}</text>"#, y + CELL * 0.7, escape(l));
        }
        for j in 0..cols {
            let v = m[(i, j)];
            let t = if limit > 0.0 { v / limit } else { 0.0 };
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{y:.1}" width="{CELL}" height="{CELL}" fill="{}"><title>{v:.6}</title></rect>"#,
                MARGIN_LEFT + j as f64 * CELL,
                diverging(t)
            );
        }
    }
    for (j, l) in col_labels.iter().enumerate().take(cols) {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + (j as f64 + 0.5) * CELL,
            MARGIN_TOP - 4.0,
            escape(l)
        );
    }
    s.push_str("</svg>\n");
    s
}

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#bab0ac"];

/// Stacked shares over time; each series is one band, bottom to top.
pub fn stacked_shares(times: &[f64], series: &[(String, Vec<f64>)], title: &str) -> String {
    let (w, h, left, top) = (640.0, 260.0, 50.0, 30.0);
    let plot_w = w - left - 130.0;
    let plot_h = h - top - 30.0;
    let (t0, t1) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a, a + 1.0),
        _ => (0.0, 1.0),
    };
    let x = |t: f64| left + (t - t0) / (t1 - t0) * plot_w;
    let y = |v: f64| top + (1.0 - v) * plot_h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="4" y="16" font-size="12">{}</text>"#, escape(title));
    let mut lower = vec![0.0; times.len()];
    for (idx, (label, values)) in series.iter().enumerate() {
        let upper: Vec<f64> = lower.iter().zip(values).map(|(a, b)| a + b).collect();
        let mut pts = String::new();
        for (t, u) in times.iter().zip(&upper) {
            let _ = write!(pts, "{:.2},{:.2} ", x(*t), y(*u));
        }
        for (t, l) in times.iter().zip(&lower).rev() {
            let _ = write!(pts, "{:.2},{:.2} ", x(*t), y(*l));
        }
        let color = PALETTE[idx % PALETTE.len()];
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" stroke="none"/>"#, pts.trim_end());
        let ly = top + 12.0 * idx as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{ly:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            left + plot_w + 10.0,
            left + plot_w + 24.0,
            ly + 9.0,
            escape(label)
        );
        lower = upper;
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="{:.1}">{t0:.1} s</text><text x="{:.1}" y="{:.1}" text-anchor="end">{t1:.1} s</text>"#,
        top + plot_h + 14.0,
        left + plot_w,
        top + plot_h + 14.0
    );
    s.push_str("</svg>\n");
    s
}
