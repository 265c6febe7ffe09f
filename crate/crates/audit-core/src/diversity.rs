//! Analysis I: intra-cultural semantic diversity grid.
//!
//! Each (concept, culture) cell is the mean pairwise cosine distance among
//! that cell's metaphor embeddings; near-zero cells surface representational
//! collapse.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{AuditError, Result};
use crate::geometry::mean_pairwise_distance;

/// Concept x culture matrix of mean intra-cluster pairwise cosine distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityGrid {
    pub concepts: Vec<String>,
    pub cultures: Vec<String>,
    /// Concept-major cell values, `cells[concept][culture]`.
    pub cells: Vec<Vec<f64>>,
    pub runs_per_pair: usize,
}

impl DiversityGrid {
    pub fn cell(&self, concept_idx: usize, culture_idx: usize) -> f64 {
        self.cells[concept_idx][culture_idx]
    }

    pub fn min(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Full-precision CSV: header row of cultures, one row per concept.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("concept");
        for c in &self.cultures {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (k, concept) in self.concepts.iter().enumerate() {
            out.push_str(&csv_field(concept));
            for v in &self.cells[k] {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Compute the diversity grid over a fully embedded, balanced corpus.
/// Concept/culture ordering follows corpus (i.e. run configuration) order.
pub fn diversity_grid(corpus: &Corpus) -> Result<DiversityGrid> {
    let concepts = corpus.concepts();
    let cultures = corpus.cultures();
    if concepts.is_empty() || cultures.is_empty() {
        return Err(AuditError::Integrity("empty corpus".into()));
    }
    let runs_per_pair = corpus.check_balanced()?;
    if runs_per_pair < 2 {
        return Err(AuditError::Integrity(format!(
            "diversity needs >= 2 records per cell, found {runs_per_pair}"
        )));
    }

    let mut offenders = Vec::new();
    let mut cells = Vec::with_capacity(concepts.len());
    for concept in &concepts {
        let mut row = Vec::with_capacity(cultures.len());
        for culture in &cultures {
            match corpus.cell_embeddings(concept, culture) {
                Ok(vectors) => row.push(mean_pairwise_distance(&vectors)?),
                Err(e) => offenders.push(format!("({concept}, {culture}): {e}")),
            }
        }
        cells.push(row);
    }
    if !offenders.is_empty() {
        return Err(AuditError::Integrity(format!(
            "cells not ready for diversity analysis: {}",
            offenders.join("; ")
        )));
    }
    Ok(DiversityGrid {
        concepts,
        cultures,
        cells,
        runs_per_pair,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankOrder {
    Ascending,
    Descending,
}

/// Cells sorted by value; ties keep grid order (concept-major). Ascending
/// order surfaces representational-collapse cells first.
pub fn rank_cells(grid: &DiversityGrid, order: RankOrder) -> Vec<(String, String, f64)> {
    let mut indexed: Vec<(usize, usize, f64)> = Vec::new();
    for k in 0..grid.concepts.len() {
        for c in 0..grid.cultures.len() {
            indexed.push((k, c, grid.cells[k][c]));
        }
    }
    indexed.sort_by(|a, b| {
        let primary = match order {
            RankOrder::Ascending => a.2.total_cmp(&b.2),
            RankOrder::Descending => b.2.total_cmp(&a.2),
        };
        primary.then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
    });
    indexed
        .into_iter()
        .map(|(k, c, v)| (grid.concepts[k].clone(), grid.cultures[c].clone(), v))
        .collect()
}
