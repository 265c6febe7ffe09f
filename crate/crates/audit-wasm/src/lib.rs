//! Browser demo: the audit analyses running on synthetic corpora, fully
//! client-side. Three interactive operations are exported:
//!
//! * [`diversity_heatmap`] — per-cell noise levels turn into the diversity
//!   heatmap; lowering sigma shows representational collapse.
//! * [`tsne_panels`] — per-culture t-SNE panels over the same synthetic
//!   concepts, exploring perplexity and iteration count.
//! * [`defaultism_demo`] — the randomization test over a planted geometry;
//!   drag the two gaps to watch arrows and stars appear.
//!
//! Everything is seeded, so the same slider positions always render the
//! same picture.

use wasm_bindgen::prelude::*;

use audit_core::corpus::{Concept, CultureCondition, RunConfig};
use audit_core::diversity::diversity_grid;
use audit_core::fixtures::{synth_corpus, PlantOffsets, PlantSpec};
use audit_core::projection::{project_per_culture, TsneConfig};
use audit_core::randtest::{defaultism_table, Direction, TestConfig};
use audit_core::report::{heatmap_svg, panels_svg};

const DIM: usize = 24;
const CONCEPTS: [&str; 5] = ["Time", "Death", "Success", "Family", "Freedom"];

fn grid(cultures: &[&str], runs: usize) -> RunConfig {
    RunConfig {
        concepts: CONCEPTS
            .iter()
            .map(|c| Concept::new(*c).expect("static concept"))
            .collect(),
        cultures: cultures
            .iter()
            .enumerate()
            .map(|(i, c)| CultureCondition::new(*c, i == 0).expect("static culture"))
            .collect(),
        runs_per_pair: runs,
        embedding_dim: DIM,
        master_seed: 0,
        concurrency: 1,
        retry: Default::default(),
        strip_stem: false,
    }
}

fn err_svg(message: &str) -> String {
    format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="480" height="60"><text x="10" y="35" font-family="sans-serif" font-size="13" fill="#b00020">{}</text></svg>"##,
        message.replace('<', "&lt;")
    )
}

pub fn diversity_heatmap_impl(noise_sigma: f64, sigma_spread: f64, seed: u32) -> String {
    let config = grid(&["Default", "U.S.", "Japan", "China", "India", "Brazil"], 12);
    let spec = PlantSpec::new(DIM, noise_sigma, u64::from(seed)).with_sigma_spread(sigma_spread);
    let corpus = match synth_corpus(&config, &spec) {
        Ok(c) => c,
        Err(e) => return err_svg(&e.to_string()),
    };
    match diversity_grid(&corpus) {
        Ok(grid) => heatmap_svg(&grid),
        Err(e) => err_svg(&e.to_string()),
    }
}

pub fn tsne_panels_impl(perplexity: f64, iterations: u32, seed: u32) -> String {
    let config = grid(&["Default", "Japan"], 12);
    let spec = PlantSpec::new(DIM, 0.12, u64::from(seed)).with_sigma_spread(0.4);
    let corpus = match synth_corpus(&config, &spec) {
        Ok(c) => c,
        Err(e) => return err_svg(&e.to_string()),
    };
    let iterations = iterations.clamp(50, 2_000) as usize;
    let cfg = TsneConfig {
        perplexity,
        iterations,
        early_exaggeration_iters: (iterations / 4).max(10),
        seed: u64::from(seed),
        ..TsneConfig::default()
    };
    match project_per_culture(&corpus, &cfg) {
        Ok(layouts) => panels_svg(&layouts),
        Err(e) => err_svg(&e.to_string()),
    }
}

pub fn defaultism_demo_impl(
    gap_reference: f64,
    gap_others: f64,
    noise_sigma: f64,
    permutations: u32,
    seed: u32,
) -> String {
    let config = grid(&["Default", "U.S.", "Japan", "Brazil"], 12);
    let mut spec = PlantSpec::new(DIM, noise_sigma, u64::from(seed));
    for concept in CONCEPTS {
        spec = spec.plant(
            concept,
            PlantOffsets {
                gap_reference,
                gap_others,
            },
        );
    }
    let corpus = match synth_corpus(&config, &spec) {
        Ok(c) => c,
        Err(e) => return format!("<p class=\"err\">{e}</p>"),
    };
    let cfg = TestConfig {
        permutations: permutations.clamp(200, 50_000) as usize,
        seed: u64::from(seed),
        ..TestConfig::default()
    };
    let outcomes = match defaultism_table(&corpus, &cfg) {
        Ok(o) => o,
        Err(e) => return format!("<p class=\"err\">{e}</p>"),
    };

    let cultures: Vec<&str> = {
        let mut seen = Vec::new();
        for o in &outcomes {
            if !seen.contains(&o.culture.as_str()) {
                seen.push(o.culture.as_str());
            }
        }
        seen
    };
    let mut html = String::from("<table><tr><th>Concept</th>");
    for c in &cultures {
        html.push_str(&format!("<th>{c}</th>"));
    }
    html.push_str("</tr>");
    for concept in CONCEPTS {
        html.push_str(&format!("<tr><td>{concept}</td>"));
        for culture in &cultures {
            let o = outcomes
                .iter()
                .find(|o| o.concept == concept && &o.culture == culture)
                .expect("full table");
            let cell = match o.outcome.direction {
                Direction::None => "\u{2013}".to_string(),
                d => format!("{}{}", d.glyph(), o.outcome.stars),
            };
            html.push_str(&format!(
                "<td title=\"p_up={:.4}, p_down={:.4}\">{cell}</td>",
                o.outcome.p_closer_us, o.outcome.p_closer_culture
            ));
        }
        html.push_str("</tr>");
    }
    html.push_str("</table><p class=\"footnote\">*p&lt;0.05, **p&lt;0.01, ***p&lt;0.001</p>");
    html
}

/// Diversity heatmap over a synthetic grid (SVG string).
#[wasm_bindgen]
pub fn diversity_heatmap(noise_sigma: f64, sigma_spread: f64, seed: u32) -> String {
    diversity_heatmap_impl(noise_sigma, sigma_spread, seed)
}

/// Per-culture t-SNE scatter panels (SVG string).
#[wasm_bindgen]
pub fn tsne_panels(perplexity: f64, iterations: u32, seed: u32) -> String {
    tsne_panels_impl(perplexity, iterations, seed)
}

/// Planted-defaultism randomization test (HTML table string).
#[wasm_bindgen]
pub fn defaultism_demo(
    gap_reference: f64,
    gap_others: f64,
    noise_sigma: f64,
    permutations: u32,
    seed: u32,
) -> String {
    defaultism_demo_impl(gap_reference, gap_others, noise_sigma, permutations, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_renders_valid_svg() {
        let svg = diversity_heatmap_impl(0.15, 0.5, 1);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("class=\"cell\"").count(), 30);

        // Zero noise collapses every cell to 0.000.
        let collapsed = diversity_heatmap_impl(0.0, 0.0, 1);
        assert_eq!(collapsed.matches(">0.000</text>").count(), 30);
    }

    #[test]
    fn heatmap_rejects_bad_sigma_gracefully() {
        let svg = diversity_heatmap_impl(0.9, 0.0, 1);
        assert!(svg.contains("noise_sigma"));
    }

    #[test]
    fn tsne_panels_render_two_panels() {
        let svg = tsne_panels_impl(8.0, 120, 3);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("class=\"panel\"").count(), 2);
        assert_eq!(svg.matches("class=\"legend\"").count(), 5);
    }

    #[test]
    fn defaultism_demo_flags_planted_geometry() {
        // Strong planted effect: every cell should point up.
        let html = defaultism_demo_impl(0.08, 0.5, 0.05, 2_000, 5);
        assert!(html.starts_with("<table>"));
        assert_eq!(html.matches('\u{2191}').count(), 10);

        // Equal gaps: quiet table.
        let quiet = defaultism_demo_impl(0.3, 0.3, 0.05, 2_000, 5);
        assert!(quiet.matches('\u{2013}').count() >= 8, "{quiet}");
    }

    #[test]
    fn same_inputs_same_bytes() {
        assert_eq!(tsne_panels_impl(6.0, 80, 9), tsne_panels_impl(6.0, 80, 9));
        assert_eq!(
            diversity_heatmap_impl(0.2, 0.3, 4),
            diversity_heatmap_impl(0.2, 0.3, 4)
        );
    }
}
