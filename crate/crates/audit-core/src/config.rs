//! Audit configuration file: grid, providers, analysis parameters and
//! output directory, parsed from TOML. Relative paths inside the file
//! resolve against the file's own directory, so configs are portable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Concept, CultureCondition, RetryPolicy, RunConfig};
use crate::error::{AuditError, Result};
use crate::projection::{TsneConfig, TsneMetric};
use crate::randtest::TestConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSection {
    pub concepts: Vec<String>,
    pub cultures: Vec<String>,
    /// Which culture is the culture-unspecified condition.
    pub default_culture: String,
    pub runs_per_pair: usize,
    pub embedding_dim: usize,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderSection {
    /// Offline provider replaying a JSON-lines fixture.
    Replay { fixture: PathBuf },
    /// Remote HTTP provider (constructed by the CLI).
    Http {
        base_url: String,
        /// Environment variable holding the bearer token.
        #[serde(default)]
        auth_env: Option<String>,
        model: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvidersSection {
    pub generation: ProviderSection,
    pub embedding: ProviderSection,
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
    #[serde(default = "default_retries")]
    pub retries: usize,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_concurrency() -> usize {
    4
}
fn default_retries() -> usize {
    3
}
fn default_backoff() -> u64 {
    250
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisSection {
    pub permutations: usize,
    pub seed: u64,
    pub alpha_levels: [f64; 3],
    pub bonferroni: bool,
    pub reference_culture: String,
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration_factor: f64,
    pub early_exaggeration_iters: usize,
    pub learning_rate: f64,
    pub euclidean_tsne: bool,
    pub strip_stem: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let test = TestConfig::default();
        let tsne = TsneConfig::default();
        AnalysisSection {
            permutations: test.permutations,
            seed: 0,
            alpha_levels: test.alpha_levels,
            bonferroni: false,
            reference_culture: test.reference_culture,
            perplexity: tsne.perplexity,
            iterations: tsne.iterations,
            early_exaggeration_factor: tsne.early_exaggeration_factor,
            early_exaggeration_iters: tsne.early_exaggeration_iters,
            learning_rate: tsne.learning_rate,
            euclidean_tsne: false,
            strip_stem: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditConfig {
    pub grid: GridSection,
    pub providers: ProvidersSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

impl AuditConfig {
    pub fn load(path: &Path) -> Result<AuditConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
        let mut config: AuditConfig = toml::from_str(&text)
            .map_err(|e| AuditError::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ProviderSection::Replay { fixture } = &mut self.providers.generation {
            resolve(fixture);
        }
        if let ProviderSection::Replay { fixture } = &mut self.providers.embedding {
            resolve(fixture);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.run_config()?.validate()?;
        self.test_config().validate()?;
        let analysis = &self.analysis;
        if !analysis.perplexity.is_finite() || analysis.perplexity <= 1.0 {
            return Err(AuditError::Config(format!(
                "perplexity must exceed 1, got {}",
                analysis.perplexity
            )));
        }
        if analysis.iterations < analysis.early_exaggeration_iters {
            return Err(AuditError::Config(
                "iterations must be >= early_exaggeration_iters".into(),
            ));
        }
        if self.grid.cultures.iter().all(|c| c != &analysis.reference_culture) {
            return Err(AuditError::Config(format!(
                "reference culture '{}' is not in the grid",
                analysis.reference_culture
            )));
        }
        if analysis.reference_culture == self.grid.default_culture {
            return Err(AuditError::Config(
                "reference culture cannot be the default condition".into(),
            ));
        }
        Ok(())
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let grid = &self.grid;
        if grid.cultures.iter().all(|c| c != &grid.default_culture) {
            return Err(AuditError::Config(format!(
                "default culture '{}' is not in the culture list",
                grid.default_culture
            )));
        }
        Ok(RunConfig {
            concepts: grid
                .concepts
                .iter()
                .map(|c| Concept::new(c.clone()))
                .collect::<Result<_>>()?,
            cultures: grid
                .cultures
                .iter()
                .map(|c| CultureCondition::new(c.clone(), *c == grid.default_culture))
                .collect::<Result<_>>()?,
            runs_per_pair: grid.runs_per_pair,
            embedding_dim: grid.embedding_dim,
            master_seed: grid.master_seed,
            concurrency: self.providers.max_concurrent,
            retry: RetryPolicy {
                max_retries: self.providers.retries,
                backoff_ms: self.providers.backoff_ms,
            },
            strip_stem: self.analysis.strip_stem,
        })
    }

    pub fn test_config(&self) -> TestConfig {
        TestConfig {
            permutations: self.analysis.permutations,
            seed: self.analysis.seed,
            alpha_levels: self.analysis.alpha_levels,
            bonferroni: self.analysis.bonferroni,
            reference_culture: self.analysis.reference_culture.clone(),
            default_condition: self.grid.default_culture.clone(),
        }
    }

    pub fn tsne_config(&self) -> TsneConfig {
        TsneConfig {
            perplexity: self.analysis.perplexity,
            iterations: self.analysis.iterations,
            early_exaggeration_factor: self.analysis.early_exaggeration_factor,
            early_exaggeration_iters: self.analysis.early_exaggeration_iters,
            learning_rate: self.analysis.learning_rate,
            seed: self.analysis.seed,
            metric: if self.analysis.euclidean_tsne {
                TsneMetric::Euclidean
            } else {
                TsneMetric::Cosine
            },
            ..TsneConfig::default()
        }
    }

    /// Stable digest of the parsed configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", crate::rng::hash_str(&canonical))
    }
}
