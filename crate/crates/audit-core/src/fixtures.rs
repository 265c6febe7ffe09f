//! Synthetic corpus generator: deterministic embedded corpora with
//! plantable geometric effects, powering the entire offline test suite.
//!
//! Each (concept, culture) cell gets a unit-sphere center; cell vectors are
//! center + seeded Gaussian noise, then scaled to mixed norms so analyses
//! exercise scale invariance. A planted-defaultism spec places the default
//! condition's center at a chosen cosine distance from the reference
//! culture's center and a (usually larger) distance from every other
//! culture's center.

use std::collections::BTreeMap;

use crate::corpus::{Corpus, MetaphorRecord, RunConfig};
use crate::error::{AuditError, Result};
use crate::geometry::EmbeddingVector;
use crate::rng::{derive_seed, hash_str, Rng};

/// Per-concept planted offsets: cosine distance from the default center to
/// the reference culture's center vs. every other culture's center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantOffsets {
    pub gap_reference: f64,
    pub gap_others: f64,
}

/// Synthetic-corpus specification.
#[derive(Debug, Clone)]
pub struct PlantSpec {
    pub dim: usize,
    pub noise_sigma: f64,
    /// Spread of per-cell noise multipliers in [1 - s, 1 + s]; 0 keeps the
    /// same sigma everywhere.
    pub sigma_spread: f64,
    pub seed: u64,
    pub reference_culture: String,
    /// Concepts with planted defaultism geometry; concepts not listed get
    /// an exchangeable null (every non-default culture shares one center).
    pub planted: BTreeMap<String, PlantOffsets>,
}

impl PlantSpec {
    pub fn new(dim: usize, noise_sigma: f64, seed: u64) -> Self {
        PlantSpec {
            dim,
            noise_sigma,
            sigma_spread: 0.0,
            seed,
            reference_culture: "U.S.".into(),
            planted: BTreeMap::new(),
        }
    }

    pub fn with_sigma_spread(mut self, spread: f64) -> Self {
        self.sigma_spread = spread;
        self
    }

    pub fn with_reference(mut self, reference: impl Into<String>) -> Self {
        self.reference_culture = reference.into();
        self
    }

    pub fn plant(mut self, concept: impl Into<String>, offsets: PlantOffsets) -> Self {
        self.planted.insert(concept.into(), offsets);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(AuditError::Config(
                "fixture dimension must be at least 2".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.noise_sigma) {
            return Err(AuditError::Config(format!(
                "noise_sigma must be in [0, 0.5) to keep clusters non-degenerate, got {}",
                self.noise_sigma
            )));
        }
        if !(0.0..1.0).contains(&self.sigma_spread) {
            return Err(AuditError::Config(format!(
                "sigma_spread must be in [0, 1), got {}",
                self.sigma_spread
            )));
        }
        for (concept, offsets) in &self.planted {
            for gap in [offsets.gap_reference, offsets.gap_others] {
                if !(0.0..=1.5).contains(&gap) {
                    return Err(AuditError::Config(format!(
                        "planted gap {gap} for concept {concept} out of range [0, 1.5]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Random unit vector.
fn unit_vector(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// Unit vector at exactly the requested cosine distance from `base`,
/// displaced along a random orthogonal direction.
fn unit_at_cosine_distance(base: &[f64], gap: f64, rng: &mut Rng) -> Vec<f64> {
    let similarity = 1.0 - gap;
    loop {
        let raw = unit_vector(base.len(), rng);
        let dot: f64 = raw.iter().zip(base).map(|(a, b)| a * b).sum();
        let mut ortho: Vec<f64> = raw.iter().zip(base).map(|(r, b)| r - dot * b).collect();
        let norm = ortho.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        for x in &mut ortho {
            *x /= norm;
        }
        let sin_part = (1.0 - similarity * similarity).max(0.0).sqrt();
        return base
            .iter()
            .zip(&ortho)
            .map(|(b, o)| similarity * b + sin_part * o)
            .collect();
    }
}

/// Cluster center for one (concept, culture) cell.
fn cell_center(config: &RunConfig, spec: &PlantSpec, concept: &str, culture_name: &str) -> Vec<f64> {
    let mut concept_rng = Rng::new(derive_seed(spec.seed, &[hash_str("center"), hash_str(concept)]));
    let base = unit_vector(spec.dim, &mut concept_rng);
    let default_name = &config.default_culture().name;
    if culture_name == default_name {
        return base;
    }
    match spec.planted.get(concept) {
        Some(offsets) => {
            // Planted geometry: each culture sits at its prescribed cosine
            // distance from the default center, along its own direction.
            let gap = if culture_name == spec.reference_culture {
                offsets.gap_reference
            } else {
                offsets.gap_others
            };
            let mut rng = Rng::new(derive_seed(
                spec.seed,
                &[hash_str("offset"), hash_str(concept), hash_str(culture_name)],
            ));
            unit_at_cosine_distance(&base, gap, &mut rng)
        }
        None => {
            // Exchangeable null: all non-default cultures of this concept
            // share one center, so relabeling their members is harmless.
            let mut rng = Rng::new(derive_seed(
                spec.seed,
                &[hash_str("shared"), hash_str(concept)],
            ));
            unit_at_cosine_distance(&base, 0.3, &mut rng)
        }
    }
}

/// Build a fully embedded synthetic corpus over the configured grid.
/// Deterministic: the same (config, spec) always produces identical bytes.
pub fn synth_corpus(config: &RunConfig, spec: &PlantSpec) -> Result<Corpus> {
    config.validate()?;
    spec.validate()?;

    let mut records = Vec::with_capacity(
        config.concepts.len() * config.cultures.len() * config.runs_per_pair,
    );
    for (concept, culture, run_index) in config.cells() {
        let center = cell_center(config, spec, concept.name(), &culture.name);
        let mut cell_rng = Rng::new(derive_seed(
            spec.seed,
            &[hash_str("cell"), hash_str(concept.name()), hash_str(&culture.name)],
        ));
        let sigma = spec.noise_sigma
            * (1.0 + spec.sigma_spread * (2.0 * cell_rng.next_f64() - 1.0));
        // Per-run RNG keyed by coordinates so any sub-grid regenerates the
        // same vectors.
        let mut run_rng = Rng::new(derive_seed(
            spec.seed,
            &[
                hash_str("run"),
                hash_str(concept.name()),
                hash_str(&culture.name),
                run_index as u64,
            ],
        ));
        let noisy: Vec<f64> = center
            .iter()
            .map(|c| c + sigma * run_rng.next_normal())
            .collect();
        // Mixed norms: scale in [0.5, 2.0) exercises cosine scale
        // invariance downstream.
        let scale = run_rng.next_range(0.5, 2.0);
        let values: Vec<f64> = noisy.iter().map(|x| x * scale).collect();
        let embedding = EmbeddingVector::new(values).map_err(|e| {
            AuditError::Config(format!(
                "degenerate fixture cell ({}, {}, run {run_index}): {e}",
                concept.name(),
                culture.name
            ))
        })?;

        records.push(MetaphorRecord {
            concept: concept.name().to_string(),
            culture: culture.name.clone(),
            run_index,
            prompt: crate::corpus::render_prompt(concept, culture),
            completion: format!(
                "{} is like synthetic metaphor {:03} for {}.",
                concept.name(),
                run_index,
                culture.name
            ),
            model: "synthetic-fixture".into(),
            timestamp: "1970-01-01T00:00:00Z".into(),
            embedding: Some(embedding),
        });
    }
    Corpus::new(records)
}
