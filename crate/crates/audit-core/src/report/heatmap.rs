//! Diversity heatmap: one labeled cell per (concept, culture), sequential
//! color scale over the grid's observed range.

use crate::diversity::DiversityGrid;

use super::svg::{coord, escape, label_color, sequential_color};

const CELL_W: f64 = 92.0;
const CELL_H: f64 = 44.0;
const LEFT: f64 = 110.0;
const TOP: f64 = 56.0;
const PAD: f64 = 12.0;

pub fn heatmap_svg(grid: &DiversityGrid) -> String {
    let rows = grid.concepts.len();
    let cols = grid.cultures.len();
    let width = LEFT + cols as f64 * CELL_W + PAD;
    let height = TOP + rows as f64 * CELL_H + PAD;

    let (min, max) = (grid.min(), grid.max());
    let span = max - min;
    let t_of = |v: f64| if span > 0.0 { (v - min) / span } else { 0.0 };

    let mut svg = String::new();
    svg.push_str(&format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = coord(width),
        h = coord(height)
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##,
        w = coord(width),
        h = coord(height)
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{x}" y="22" font-family="sans-serif" font-size="14" font-weight="bold" text-anchor="middle">Intra-cultural semantic diversity (mean pairwise cosine distance, {runs} runs)</text>"#,
        x = coord(width / 2.0),
        runs = grid.runs_per_pair
    ));
    svg.push('\n');

    for (c, culture) in grid.cultures.iter().enumerate() {
        svg.push_str(&format!(
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="middle">{t}</text>"#,
            x = coord(LEFT + (c as f64 + 0.5) * CELL_W),
            y = coord(TOP - 8.0),
            t = escape(culture)
        ));
        svg.push('\n');
    }

    for (k, concept) in grid.concepts.iter().enumerate() {
        svg.push_str(&format!(
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="end">{t}</text>"#,
            x = coord(LEFT - 8.0),
            y = coord(TOP + (k as f64 + 0.5) * CELL_H + 4.0),
            t = escape(concept)
        ));
        svg.push('\n');
        for c in 0..grid.cultures.len() {
            let v = grid.cell(k, c);
            let t = t_of(v);
            let x = LEFT + c as f64 * CELL_W;
            let y = TOP + k as f64 * CELL_H;
            svg.push_str(&format!(
                r##"<rect class="cell" x="{x}" y="{y}" width="{w}" height="{h}" fill="{fill}" stroke="#ffffff" stroke-width="1"/>"##,
                x = coord(x),
                y = coord(y),
                w = coord(CELL_W),
                h = coord(CELL_H),
                fill = sequential_color(t)
            ));
            svg.push('\n');
            svg.push_str(&format!(
                r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="13" text-anchor="middle" fill="{fill}">{v:.3}</text>"#,
                x = coord(x + CELL_W / 2.0),
                y = coord(y + CELL_H / 2.0 + 4.5),
                fill = label_color(t)
            ));
            svg.push('\n');
        }
    }
    svg.push_str("</svg>\n");
    svg
}
