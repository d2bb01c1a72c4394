//! Plain SVG renderings of specialization matrices and proximity networks.

use ndarray::Array2;
use std::fmt::Write;

use crate::specialization::{nested_sort, SpecializationMatrix};

const CELL: f64 = 8.0;
const LABEL_W: f64 = 90.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// The binary matrix with regions by descending diversity (rows) and
/// activities by descending ubiquity (columns).
pub fn heatmap_svg<S: AsRef<str>>(m: &SpecializationMatrix, regions: &[S], activities: &[S], title: &str) -> String {
    let (rows, cols) = nested_sort(m, regions, activities);
    let width = LABEL_W + CELL * cols.len() as f64 + 10.0;
    let height = 30.0 + LABEL_W + CELL * rows.len() as f64 + 10.0;
    let top = 30.0 + LABEL_W;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<text x="4" y="18" font-size="12">{}</text>"#, escape(title));
    for (c, &k) in cols.iter().enumerate() {
        let x = LABEL_W + CELL * (c as f64 + 0.7);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" font-size="6" transform="rotate(-90 {x:.1} {:.1})">{}</text>"#,
            top - 2.0,
            top - 2.0,
            escape(activities[k].as_ref())
        );
    }
    for (r, &i) in rows.iter().enumerate() {
        let y = top + CELL * r as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="6" text-anchor="end">{}</text>"#,
            LABEL_W - 2.0,
            y + CELL * 0.75,
            escape(regions[i].as_ref())
        );
        for (c, &k) in cols.iter().enumerate() {
            if m.get(i, k) == 1 {
                let _ = writeln!(
                    s,
                    r##"<rect x="{:.1}" y="{y:.1}" width="{CELL}" height="{CELL}" fill="#1f3b73"/>"##,
                    LABEL_W + CELL * c as f64
                );
            }
        }
    }
    let _ = writeln!(
        s,
        r##"<rect x="{LABEL_W}" y="{top}" width="{:.1}" height="{:.1}" fill="none" stroke="#888" stroke-width="0.5"/>"##,
        CELL * cols.len() as f64,
        CELL * rows.len() as f64
    );
    s.push_str("</svg>\n");
    s
}

/// Where the nodes of a network go.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkLayout {
    /// Evenly spaced on a circle in input order.
    Circle,
    /// `(lat, lon)` per node, drawn in an equirectangular projection.
    Geographic(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOptions {
    pub layout: NetworkLayout,
    /// Edges with proximity below this are not drawn.
    pub min_proximity: f64,
    pub title: String,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        NetworkOptions {
            layout: NetworkLayout::Circle,
            min_proximity: 0.5,
            title: String::new(),
        }
    }
}

fn positions(layout: &NetworkLayout, n: usize, size: f64, margin: f64) -> Vec<(f64, f64)> {
    let inner = size - 2.0 * margin;
    match layout {
        NetworkLayout::Circle => (0..n)
            .map(|a| {
                let angle = std::f64::consts::TAU * a as f64 / n.max(1) as f64;
                (size / 2.0 + inner / 2.0 * angle.cos(), size / 2.0 + inner / 2.0 * angle.sin())
            })
            .collect(),
        NetworkLayout::Geographic(coords) => {
            let finite = || coords.iter().filter(|c| c.0.is_finite() && c.1.is_finite());
            let bounds = |f: fn(&(f64, f64)) -> f64| {
                let lo = finite().map(f).fold(f64::INFINITY, f64::min);
                let hi = finite().map(f).fold(f64::NEG_INFINITY, f64::max);
                if lo.is_finite() {
                    (lo, (hi - lo).max(1e-9))
                } else {
                    (0.0, 1.0)
                }
            };
            let (lat0, lat_span) = bounds(|c| c.0);
            let (lon0, lon_span) = bounds(|c| c.1);
            let scale = inner / lat_span.max(lon_span);
            coords
                .iter()
                .map(|&(lat, lon)| {
                    if lat.is_finite() && lon.is_finite() {
                        (margin + (lon - lon0) * scale, size - margin - (lat - lat0) * scale)
                    } else {
                        (margin / 2.0, size - margin / 2.0)
                    }
                })
                .collect()
        }
    }
}

/// Proximity network: one node per activity with area proportional to
/// `counts`, and an edge for every pair at or above the threshold.
pub fn network_svg<S: AsRef<str>>(phi: &Array2<f64>, activities: &[S], counts: &[f64], options: &NetworkOptions) -> String {
    let n = activities.len();
    assert_eq!(phi.dim(), (n, n), "proximity and labels disagree");
    assert_eq!(counts.len(), n, "counts and labels disagree");
    let size = 800.0;
    let margin = 60.0;
    let pos = positions(&options.layout, n, size, margin);
    let max_count = counts.iter().copied().fold(0.0, f64::max);
    let radius = |c: f64| if max_count > 0.0 { 2.0 + 18.0 * (c / max_count).sqrt() } else { 4.0 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(&options.title));
    s.push_str("<g stroke=\"#7a869a\">\n");
    for a in 0..n {
        for b in a + 1..n {
            let w = phi[(a, b)];
            if w >= options.min_proximity && w > 0.0 {
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke-width="{:.2}" stroke-opacity="{:.2}"/>"#,
                    pos[a].0,
                    pos[a].1,
                    pos[b].0,
                    pos[b].1,
                    0.5 + 2.5 * w,
                    0.3 + 0.6 * w
                );
            }
        }
    }
    s.push_str("</g>\n");
    for a in 0..n {
        let (x, y) = pos[a];
        let r = radius(counts[a]);
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="#d9822b" fill-opacity="0.85" stroke="#5c3310" stroke-width="0.5"><title>{}</title></circle>"##,
            escape(activities[a].as_ref())
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="8">{}</text>"#,
            x + r + 1.0,
            y + 3.0,
            escape(activities[a].as_ref())
        );
    }
    s.push_str("</svg>\n");
    s
}
