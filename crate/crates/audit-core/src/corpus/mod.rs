//! Audit grid definition, prompt rendering, generation/embedding
//! orchestration and corpus persistence.

mod generate;
mod prompt;
mod provider;
mod store;

pub use generate::{embed_corpus, generate_corpus, GenerationStats};
pub use prompt::render_prompt;
pub use provider::{
    EmbeddingProvider, EmbeddingRequest, GenerationOutput, GenerationProvider, GenerationRequest,
    ReplayProvider,
};
pub use store::{corpus_digest, load_corpus, save_corpus};
pub(crate) use store::write_atomically as write_file;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::geometry::EmbeddingVector;

/// One abstract concept probed by the audit (default set: Time, Death,
/// Success, Family, Freedom).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Concept {
    name: String,
}

impl Concept {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(AuditError::Config("concept name must be non-empty".into()));
        }
        Ok(Concept { name })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// A cultural prompting condition; exactly one condition per configuration
/// is the culture-unspecified default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CultureCondition {
    pub name: String,
    pub is_default: bool,
}

impl CultureCondition {
    pub fn new(name: impl Into<String>, is_default: bool) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(AuditError::Config("culture name must be non-empty".into()));
        }
        Ok(CultureCondition { name, is_default })
    }
}

/// Retry policy for provider calls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: usize,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            backoff_ms: 250,
        }
    }
}

/// The audit grid plus the runtime knobs generation needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub concepts: Vec<Concept>,
    pub cultures: Vec<CultureCondition>,
    pub runs_per_pair: usize,
    pub embedding_dim: usize,
    pub master_seed: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Embed the bare metaphor instead of the full completion sentence by
    /// stripping the leading "<Concept> is like " stem when present.
    #[serde(default)]
    pub strip_stem: bool,
}

fn default_concurrency() -> usize {
    4
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.concepts.is_empty() {
            return Err(AuditError::Config("at least one concept required".into()));
        }
        if self.cultures.is_empty() {
            return Err(AuditError::Config("at least one culture required".into()));
        }
        if self.runs_per_pair < 2 {
            return Err(AuditError::Config(format!(
                "runs_per_pair must be >= 2 (diversity needs pairs), got {}",
                self.runs_per_pair
            )));
        }
        if self.embedding_dim == 0 {
            return Err(AuditError::Config("embedding_dim must be positive".into()));
        }
        if self.concurrency == 0 {
            return Err(AuditError::Config("concurrency must be positive".into()));
        }
        let mut names: Vec<&str> = self.concepts.iter().map(|c| c.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(AuditError::Config("concept names must be unique".into()));
        }
        let mut cnames: Vec<&str> = self.cultures.iter().map(|c| c.name.as_str()).collect();
        cnames.sort_unstable();
        if cnames.windows(2).any(|w| w[0] == w[1]) {
            return Err(AuditError::Config("culture names must be unique".into()));
        }
        let defaults = self.cultures.iter().filter(|c| c.is_default).count();
        if defaults != 1 {
            return Err(AuditError::Config(format!(
                "exactly one culture condition must be the default, found {defaults}"
            )));
        }
        Ok(())
    }

    pub fn default_culture(&self) -> &CultureCondition {
        self.cultures
            .iter()
            .find(|c| c.is_default)
            .expect("validated config has a default condition")
    }

    /// Grid cells in configuration order: concepts outer, cultures inner,
    /// runs innermost.
    pub fn cells(&self) -> impl Iterator<Item = (&Concept, &CultureCondition, usize)> {
        self.concepts.iter().flat_map(move |k| {
            self.cultures
                .iter()
                .flat_map(move |c| (0..self.runs_per_pair).map(move |r| (k, c, r)))
        })
    }
}

/// One generated metaphor with its grid coordinates, provenance metadata
/// and (once embedded) its sentence embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaphorRecord {
    pub concept: String,
    pub culture: String,
    pub run_index: usize,
    pub prompt: String,
    pub completion: String,
    pub model: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingVector>,
}

impl MetaphorRecord {
    pub fn key(&self) -> (&str, &str, usize) {
        (&self.concept, &self.culture, self.run_index)
    }

    /// Text handed to the embedding provider: the full completion sentence,
    /// or the bare metaphor with the "<Concept> is like " stem removed.
    pub fn embedding_input(&self, strip_stem: bool) -> &str {
        if strip_stem {
            let stem = format!("{} is like ", self.concept);
            if let Some(rest) = self.completion.strip_prefix(&stem) {
                return rest;
            }
        }
        &self.completion
    }
}

/// An ordered collection of metaphor records with unique grid keys.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    records: Vec<MetaphorRecord>,
}

impl Corpus {
    pub fn new(records: Vec<MetaphorRecord>) -> Result<Self> {
        let corpus = Corpus { records };
        corpus.check_unique_keys()?;
        Ok(corpus)
    }

    pub fn records(&self) -> &[MetaphorRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn check_unique_keys(&self) -> Result<()> {
        let mut keys: Vec<(&str, &str, usize)> = self.records.iter().map(|r| r.key()).collect();
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(AuditError::Integrity(format!(
                "duplicate record key ({}, {}, run {})",
                w[0].0, w[0].1, w[0].2
            )));
        }
        Ok(())
    }

    /// Concept names in first-appearance order.
    pub fn concepts(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.records {
            if !seen.iter().any(|s: &String| s == &r.concept) {
                seen.push(r.concept.clone());
            }
        }
        seen
    }

    /// Culture names in first-appearance order.
    pub fn cultures(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.records {
            if !seen.iter().any(|s: &String| s == &r.culture) {
                seen.push(r.culture.clone());
            }
        }
        seen
    }

    pub fn cell_records(&self, concept: &str, culture: &str) -> Vec<&MetaphorRecord> {
        self.records
            .iter()
            .filter(|r| r.concept == concept && r.culture == culture)
            .collect()
    }

    /// Embedded vectors of one (concept, culture) cell, failing if any
    /// record in the cell lacks an embedding.
    pub fn cell_embeddings(&self, concept: &str, culture: &str) -> Result<Vec<EmbeddingVector>> {
        let records = self.cell_records(concept, culture);
        let mut out = Vec::with_capacity(records.len());
        for r in records {
            match &r.embedding {
                Some(e) => out.push(e.clone()),
                None => {
                    return Err(AuditError::Integrity(format!(
                        "record ({}, {}, run {}) has no embedding",
                        r.concept, r.culture, r.run_index
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Verify every (concept, culture) cell holds the same number of
    /// records; returns that count.
    pub fn check_balanced(&self) -> Result<usize> {
        let concepts = self.concepts();
        let cultures = self.cultures();
        let mut expected = None;
        let mut offenders = Vec::new();
        for k in &concepts {
            for c in &cultures {
                let n = self.cell_records(k, c).len();
                match expected {
                    None => expected = Some(n),
                    Some(e) if e != n => offenders.push(format!("({k}, {c}): {n} records")),
                    _ => {}
                }
            }
        }
        if !offenders.is_empty() {
            return Err(AuditError::Integrity(format!(
                "unbalanced grid (expected {} records per cell): {}",
                expected.unwrap_or(0),
                offenders.join(", ")
            )));
        }
        expected.ok_or_else(|| AuditError::Integrity("empty corpus".into()))
    }

    /// All records of one culture across concepts, in corpus order.
    pub fn culture_records(&self, culture: &str) -> Vec<&MetaphorRecord> {
        self.records
            .iter()
            .filter(|r| r.culture == culture)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config() -> RunConfig {
        RunConfig {
            concepts: vec![Concept::new("Time").unwrap(), Concept::new("Death").unwrap()],
            cultures: vec![
                CultureCondition::new("Default", true).unwrap(),
                CultureCondition::new("Japan", false).unwrap(),
            ],
            runs_per_pair: 2,
            embedding_dim: 4,
            master_seed: 1,
            concurrency: 2,
            retry: RetryPolicy::default(),
            strip_stem: false,
        }
    }

    #[test]
    fn validates_default_condition_count() {
        let mut cfg = small_config();
        cfg.cultures[0].is_default = false;
        assert!(matches!(cfg.validate(), Err(AuditError::Config(_))));
        cfg.cultures[0].is_default = true;
        cfg.cultures[1].is_default = true;
        assert!(matches!(cfg.validate(), Err(AuditError::Config(_))));
    }

    #[test]
    fn validates_runs_per_pair() {
        let mut cfg = small_config();
        cfg.runs_per_pair = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_duplicate_names() {
        let mut cfg = small_config();
        cfg.concepts.push(Concept::new("Time").unwrap());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cells_enumerates_grid_in_order() {
        let cfg = small_config();
        let cells: Vec<_> = cfg
            .cells()
            .map(|(k, c, r)| (k.name().to_string(), c.name.clone(), r))
            .collect();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0], ("Time".into(), "Default".into(), 0));
        assert_eq!(cells[1], ("Time".into(), "Default".into(), 1));
        assert_eq!(cells[2], ("Time".into(), "Japan".into(), 0));
        assert_eq!(cells[7], ("Death".into(), "Japan".into(), 1));
    }

    #[test]
    fn duplicate_keys_rejected() {
        let r = MetaphorRecord {
            concept: "Time".into(),
            culture: "Japan".into(),
            run_index: 0,
            prompt: "p".into(),
            completion: "c".into(),
            model: "m".into(),
            timestamp: "t".into(),
            embedding: None,
        };
        let err = Corpus::new(vec![r.clone(), r]).unwrap_err();
        assert!(matches!(err, AuditError::Integrity(_)));
    }

    #[test]
    fn embedding_input_strips_stem_only_when_asked() {
        let r = MetaphorRecord {
            concept: "Time".into(),
            culture: "Japan".into(),
            run_index: 0,
            prompt: "p".into(),
            completion: "Time is like a river carving stone.".into(),
            model: "m".into(),
            timestamp: "t".into(),
            embedding: None,
        };
        assert_eq!(r.embedding_input(false), "Time is like a river carving stone.");
        assert_eq!(r.embedding_input(true), "a river carving stone.");
    }
}
