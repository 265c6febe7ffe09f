//! Pluggable generation and embedding providers, plus the offline replay
//! provider that serves recorded fixture responses.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::error::{AuditError, Result};
use crate::geometry::EmbeddingVector;

/// Fixed timestamp used by deterministic providers so replayed corpora are
/// byte-identical across runs.
pub const REPLAY_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone)]
pub struct GenerationRequest<'a> {
    pub concept: &'a str,
    pub culture: &'a str,
    pub run_index: usize,
    pub prompt: &'a str,
}

#[derive(Debug, Clone)]
pub struct GenerationOutput {
    pub completion: String,
    pub model: String,
    pub timestamp: String,
}

#[derive(Debug, Clone)]
pub struct EmbeddingRequest<'a> {
    pub concept: &'a str,
    pub culture: &'a str,
    pub run_index: usize,
    pub text: &'a str,
}

pub trait GenerationProvider: Sync {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<GenerationOutput>;
    /// Stable identifier recorded in provenance metadata and cache keys.
    fn model_id(&self) -> &str;
}

pub trait EmbeddingProvider: Sync {
    fn embed(&self, req: &EmbeddingRequest<'_>) -> Result<Vec<f64>>;
    fn model_id(&self) -> &str;
}

#[derive(Debug, Deserialize)]
struct ReplayLine {
    concept: String,
    culture: String,
    run_index: usize,
    completion: String,
    #[serde(default)]
    embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct ReplayEntry {
    completion: String,
    embedding: Option<Vec<f64>>,
}

/// Offline stand-in for the generation/embedding APIs: serves completions
/// and embeddings recorded in a JSON-lines fixture keyed by
/// (concept, culture, run_index).
pub struct ReplayProvider {
    entries: HashMap<(String, String, usize), ReplayEntry>,
    model: String,
}

impl ReplayProvider {
    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| AuditError::io(path, e))?;
        let reader = BufReader::new(file);
        let mut entries = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| AuditError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ReplayLine = serde_json::from_str(&line).map_err(|e| AuditError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                detail: e.to_string(),
            })?;
            entries.insert(
                (parsed.concept, parsed.culture, parsed.run_index),
                ReplayEntry {
                    completion: parsed.completion,
                    embedding: parsed.embedding,
                },
            );
        }
        Ok(ReplayProvider {
            entries,
            model: "replay".into(),
        })
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    fn entry(&self, concept: &str, culture: &str, run_index: usize) -> Result<&ReplayEntry> {
        self.entries
            .get(&(concept.to_string(), culture.to_string(), run_index))
            .ok_or_else(|| {
                AuditError::Provider(format!(
                    "replay fixture has no entry for ({concept}, {culture}, run {run_index})"
                ))
            })
    }
}

impl GenerationProvider for ReplayProvider {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<GenerationOutput> {
        let entry = self.entry(req.concept, req.culture, req.run_index)?;
        Ok(GenerationOutput {
            completion: entry.completion.clone(),
            model: self.model.clone(),
            timestamp: REPLAY_TIMESTAMP.into(),
        })
    }

    fn model_id(&self) -> &str {
        &self.model
    }
}

impl EmbeddingProvider for ReplayProvider {
    fn embed(&self, req: &EmbeddingRequest<'_>) -> Result<Vec<f64>> {
        let entry = self.entry(req.concept, req.culture, req.run_index)?;
        entry.embedding.clone().ok_or_else(|| {
            AuditError::Provider(format!(
                "replay fixture entry ({}, {}, run {}) has no embedding",
                req.concept, req.culture, req.run_index
            ))
        })
    }

    fn model_id(&self) -> &str {
        &self.model
    }
}

/// Validate a provider-returned embedding against the configured dimension.
pub(crate) fn validate_embedding(
    raw: Vec<f64>,
    expected_dim: usize,
    concept: &str,
    culture: &str,
    run_index: usize,
) -> Result<EmbeddingVector> {
    if raw.len() != expected_dim {
        return Err(AuditError::DimensionMismatch {
            expected: expected_dim,
            got: raw.len(),
            context: Some(format!("embedding for ({concept}, {culture}, run {run_index})")),
        });
    }
    EmbeddingVector::new(raw).map_err(|e| match e {
        AuditError::ZeroNorm { .. } => AuditError::ZeroNorm {
            context: Some(format!(
                "embedding for ({concept}, {culture}, run {run_index}) breaks cosine distance"
            )),
        },
        other => other,
    })
}
