//! Scatter panels: one t-SNE panel per culture, points colored by concept
//! with a single legend shared across panels.

use crate::projection::Layout2D;

use super::svg::{concept_color, coord, escape};

const PANEL_W: f64 = 270.0;
const PANEL_H: f64 = 240.0;
const GAP: f64 = 18.0;
const LEGEND_H: f64 = 34.0;
const MARGIN: f64 = 14.0;
const TITLE_H: f64 = 22.0;

/// Distinct concepts in first-appearance order across all layouts; this
/// fixes the concept -> color assignment shared by every panel.
fn concept_order(layouts: &[(String, Layout2D)]) -> Vec<String> {
    let mut seen = Vec::new();
    for (_, layout) in layouts {
        for label in &layout.labels {
            if !seen.iter().any(|s: &String| s == &label.concept) {
                seen.push(label.concept.clone());
            }
        }
    }
    seen
}

pub fn panels_svg(layouts: &[(String, Layout2D)]) -> String {
    let concepts = concept_order(layouts);
    let n = layouts.len();
    let cols = n.clamp(1, 3);
    let rows = n.div_ceil(cols);
    let width = MARGIN * 2.0 + cols as f64 * PANEL_W + (cols.saturating_sub(1)) as f64 * GAP;
    let height =
        MARGIN * 2.0 + LEGEND_H + rows as f64 * (PANEL_H + GAP);

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

    // Shared legend.
    let mut lx = MARGIN + 4.0;
    for (i, concept) in concepts.iter().enumerate() {
        svg.push_str(&format!(
            r#"<circle class="legend" cx="{x}" cy="{y}" r="5" fill="{fill}"/>"#,
            x = coord(lx),
            y = coord(MARGIN + 10.0),
            fill = concept_color(i)
        ));
        svg.push('\n');
        svg.push_str(&format!(
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12">{t}</text>"#,
            x = coord(lx + 10.0),
            y = coord(MARGIN + 14.0),
            t = escape(concept)
        ));
        svg.push('\n');
        lx += 10.0 + 9.0 * concept.chars().count() as f64 + 26.0;
    }

    for (idx, (culture, layout)) in layouts.iter().enumerate() {
        let col = idx % cols;
        let row = idx / cols;
        let ox = MARGIN + col as f64 * (PANEL_W + GAP);
        let oy = MARGIN + LEGEND_H + row as f64 * (PANEL_H + GAP);

        svg.push_str(&format!(
            r##"<g class="panel"><rect x="{x}" y="{y}" width="{w}" height="{h}" fill="#fafafa" stroke="#cccccc" stroke-width="1"/>"##,
            x = coord(ox),
            y = coord(oy),
            w = coord(PANEL_W),
            h = coord(PANEL_H)
        ));
        svg.push('\n');
        svg.push_str(&format!(
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="13" font-weight="bold" text-anchor="middle">{t}</text>"#,
            x = coord(ox + PANEL_W / 2.0),
            y = coord(oy + 16.0),
            t = escape(culture)
        ));
        svg.push('\n');

        // Per-panel autoscale with an 8% pad; degenerate extents fall back
        // to a unit box.
        let (mut x0, mut x1, mut y0, mut y1) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &layout.points {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        let pad_x = ((x1 - x0) * 0.08).max(1e-9);
        let pad_y = ((y1 - y0) * 0.08).max(1e-9);
        x0 -= pad_x;
        x1 += pad_x;
        y0 -= pad_y;
        y1 += pad_y;

        let plot_x = ox + 8.0;
        let plot_y = oy + TITLE_H + 4.0;
        let plot_w = PANEL_W - 16.0;
        let plot_h = PANEL_H - TITLE_H - 14.0;
        for (p, label) in layout.points.iter().zip(&layout.labels) {
            let ci = concepts
                .iter()
                .position(|c| c == &label.concept)
                .unwrap_or(0);
            let px = plot_x + (p[0] - x0) / (x1 - x0) * plot_w;
            // SVG y grows downward.
            let py = plot_y + (y1 - p[1]) / (y1 - y0) * plot_h;
            svg.push_str(&format!(
                r#"<circle cx="{x}" cy="{y}" r="3" fill="{fill}" fill-opacity="0.8"/>"#,
                x = coord(px),
                y = coord(py),
                fill = concept_color(ci)
            ));
            svg.push('\n');
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::PointLabel;

    fn layout(culture: &str, concepts: &[&str], points_per: usize) -> (String, Layout2D) {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (i, concept) in concepts.iter().enumerate() {
            for r in 0..points_per {
                points.push([i as f64 + r as f64 * 0.1, r as f64]);
                labels.push(PointLabel {
                    concept: (*concept).into(),
                    culture: culture.into(),
                    run_index: r,
                });
            }
        }
        (
            culture.to_string(),
            Layout2D {
                points,
                labels,
                final_kl: 0.5,
                exaggeration_kl: 1.0,
            },
        )
    }

    #[test]
    fn six_cultures_six_panels_five_legend_entries() {
        let concepts = ["Time", "Death", "Success", "Family", "Freedom"];
        let layouts: Vec<(String, Layout2D)> = ["Default", "U.S.", "Japan", "China", "India", "Brazil"]
            .iter()
            .map(|c| layout(c, &concepts, 4))
            .collect();
        let svg = panels_svg(&layouts);
        assert_eq!(svg.matches("class=\"panel\"").count(), 6);
        assert_eq!(svg.matches("class=\"legend\"").count(), 5);
    }

    #[test]
    fn single_culture_single_concept() {
        let layouts = vec![layout("Default", &["Time"], 5)];
        let svg = panels_svg(&layouts);
        assert_eq!(svg.matches("class=\"panel\"").count(), 1);
        assert_eq!(svg.matches("class=\"legend\"").count(), 1);
        assert_eq!(svg.matches("<circle cx=").count(), 5);
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let layouts = vec![layout("Default", &["Time", "Death"], 3)];
        assert_eq!(panels_svg(&layouts), panels_svg(&layouts));
    }
}
