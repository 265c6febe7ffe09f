//! Markdown rendering of the defaultism table: concepts as rows, comparison
//! cultures as columns, directional arrows with significance stars.

use crate::error::{AuditError, Result};
use crate::randtest::{DefaultismOutcome, Direction};

/// Threshold legend reproduced verbatim under the table.
pub const THRESHOLD_FOOTNOTE: &str = "*p<0.05, **p<0.01, ***p<0.001";

fn first_appearance<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for item in items {
        if !seen.iter().any(|s| s == item) {
            seen.push(item.to_string());
        }
    }
    seen
}

/// Build the Markdown table. Outcomes must cover the full
/// concept x comparison-culture grid exactly once per cell.
pub fn defaultism_markdown(outcomes: &[DefaultismOutcome]) -> Result<String> {
    if outcomes.is_empty() {
        return Err(AuditError::Argument("no outcomes to tabulate".into()));
    }
    let concepts = first_appearance(outcomes.iter().map(|o| o.concept.as_str()));
    let cultures = first_appearance(outcomes.iter().map(|o| o.culture.as_str()));

    let mut missing = Vec::new();
    let mut lookup = std::collections::HashMap::new();
    for o in outcomes {
        if lookup
            .insert((o.concept.as_str(), o.culture.as_str()), o)
            .is_some()
        {
            return Err(AuditError::Integrity(format!(
                "duplicate outcome for ({}, {})",
                o.concept, o.culture
            )));
        }
    }
    for k in &concepts {
        for c in &cultures {
            if !lookup.contains_key(&(k.as_str(), c.as_str())) {
                missing.push(format!("({k}, {c})"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(AuditError::Integrity(format!(
            "defaultism table is missing cells: {}",
            missing.join(", ")
        )));
    }

    let mut md = String::from("| Concept |");
    for c in &cultures {
        md.push_str(&format!(" {c} |"));
    }
    md.push('\n');
    md.push_str("| --- |");
    for _ in &cultures {
        md.push_str(" --- |");
    }
    md.push('\n');
    for k in &concepts {
        md.push_str(&format!("| {k} |"));
        for c in &cultures {
            let o = lookup[&(k.as_str(), c.as_str())];
            let cell = match o.outcome.direction {
                Direction::None => Direction::None.glyph().to_string(),
                d => format!("{}{}", d.glyph(), o.outcome.stars),
            };
            md.push_str(&format!(" {cell} |"));
        }
        md.push('\n');
    }
    md.push('\n');
    md.push_str(THRESHOLD_FOOTNOTE);
    md.push('\n');
    Ok(md)
}
