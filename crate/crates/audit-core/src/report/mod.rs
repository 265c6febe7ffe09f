//! Report assembly: composes generate, embed, diversity, projection and
//! defaultism into one pipeline, emits every artifact (CSV, SVG, Markdown,
//! summary JSON) and skips stages whose inputs' digests are unchanged.
//!
//! Everything emitted is deterministic: no timestamps, fixed decimal
//! formatting, stable ordering. Rerunning over unchanged inputs rewrites
//! byte-identical files and reports every stage as cached.

mod heatmap;
mod panels;
mod svg;
mod table;

pub use heatmap::heatmap_svg;
pub use panels::panels_svg;
pub use table::{defaultism_markdown, THRESHOLD_FOOTNOTE};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::AuditConfig;
use crate::corpus::{
    corpus_digest, embed_corpus, generate_corpus, save_corpus, EmbeddingProvider,
    GenerationProvider,
};
use crate::diversity::{diversity_grid, DiversityGrid};
use crate::error::{AuditError, Result};
use crate::projection::{project_per_culture, Layout2D};
use crate::randtest::{defaultism_csv, defaultism_table, DefaultismOutcome};
use crate::rng::hash_bytes;

pub const SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";
pub const CORPUS_FILE: &str = "corpus.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageState {
    Computed,
    Cached,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: String,
    pub state: StageState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusInfo {
    pub digest: String,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CultureLayout {
    pub culture: String,
    #[serde(flatten)]
    pub layout: Layout2D,
}

/// The machine-readable audit summary; serialized as `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub config_digest: String,
    pub corpus: CorpusInfo,
    pub diversity: DiversityGrid,
    pub defaultism: Vec<DefaultismOutcome>,
    pub layouts: Vec<CultureLayout>,
    /// Emitted artifact digests, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    /// Snapshot of the configuration the report was produced from.
    pub config: AuditConfig,
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub report: AuditReport,
    pub stages: Vec<StageStatus>,
    pub warnings: Vec<String>,
}

impl PipelineOutcome {
    pub fn all_cached(&self) -> bool {
        self.stages.iter().all(|s| s.state == StageState::Cached)
    }
}

fn digest_of(bytes: &[u8]) -> String {
    format!("{:016x}", hash_bytes(bytes))
}

/// File-name-safe culture tag for `tsne_<culture>.csv`.
pub fn sanitize_culture(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn tsne_file_name(culture: &str) -> String {
    format!("tsne_{}.csv", sanitize_culture(culture))
}

/// Render every report artifact to bytes, in emission order.
fn render_artifacts(
    grid: &DiversityGrid,
    layouts: &[(String, Layout2D)],
    outcomes: &[DefaultismOutcome],
) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    files.push(("diversity.csv".to_string(), grid.to_csv().into_bytes()));
    files.push(("diversity.svg".to_string(), heatmap_svg(grid).into_bytes()));
    for (culture, layout) in layouts {
        files.push((tsne_file_name(culture), layout.to_csv().into_bytes()));
    }
    files.push(("panels.svg".to_string(), panels_svg(layouts).into_bytes()));
    files.push(("defaultism.csv".to_string(), defaultism_csv(outcomes).into_bytes()));
    files.push((
        "defaultism.md".to_string(),
        defaultism_markdown(outcomes)?.into_bytes(),
    ));
    Ok(files)
}

/// Write the diversity heatmap (`diversity.svg`) and its companion
/// full-precision `diversity.csv` into `dir`.
pub fn emit_heatmap(grid: &DiversityGrid, dir: &Path) -> Result<()> {
    crate::corpus::write_file(&dir.join("diversity.csv"), grid.to_csv().as_bytes())?;
    crate::corpus::write_file(&dir.join("diversity.svg"), heatmap_svg(grid).as_bytes())
}

/// Write the per-culture scatter panels (`panels.svg`) plus one
/// `tsne_<culture>.csv` per culture into `dir`.
pub fn emit_scatter_panels(layouts: &[(String, Layout2D)], dir: &Path) -> Result<()> {
    if layouts.is_empty() {
        return Err(AuditError::Argument("no layouts to emit".into()));
    }
    for (culture, layout) in layouts {
        crate::corpus::write_file(&dir.join(tsne_file_name(culture)), layout.to_csv().as_bytes())?;
    }
    crate::corpus::write_file(&dir.join("panels.svg"), panels_svg(layouts).as_bytes())
}

/// Write the directional significance table (`defaultism.md` and
/// `defaultism.csv`) into `dir`.
pub fn emit_defaultism_table(outcomes: &[DefaultismOutcome], dir: &Path) -> Result<()> {
    let md = defaultism_markdown(outcomes)?;
    crate::corpus::write_file(&dir.join("defaultism.csv"), defaultism_csv(outcomes).as_bytes())?;
    crate::corpus::write_file(&dir.join("defaultism.md"), md.as_bytes())
}

fn read_previous_report(path: &Path) -> Option<AuditReport> {
    let bytes = std::fs::read(path).ok()?;
    let report: AuditReport = serde_json::from_slice(&bytes).ok()?;
    (report.schema_version == SCHEMA_VERSION).then_some(report)
}

fn outputs_intact(dir: &Path, outputs: &BTreeMap<String, String>) -> bool {
    outputs.iter().all(|(name, digest)| {
        std::fs::read(dir.join(name))
            .map(|bytes| digest_of(&bytes) == *digest)
            .unwrap_or(false)
    })
}

/// Execute the full audit pipeline: generate -> embed -> diversity ->
/// projection -> defaultism -> emit, reusing caches wherever inputs are
/// unchanged. Artifacts land in the configured output directory.
pub fn run_pipeline(
    config: &AuditConfig,
    generation: &dyn GenerationProvider,
    embedding: &dyn EmbeddingProvider,
) -> Result<PipelineOutcome> {
    // Fail-fast validation before any provider call.
    config.validate()?;
    let run_cfg = config.run_config()?;
    let out_dir = &config.output.dir;
    std::fs::create_dir_all(out_dir).map_err(|e| AuditError::io(out_dir, e))?;

    let mut stages = Vec::new();
    let mut warnings = Vec::new();
    let stage_of = |name: &str, cached: bool| StageStatus {
        stage: name.to_string(),
        state: if cached {
            StageState::Cached
        } else {
            StageState::Computed
        },
    };

    let (corpus, gen_stats) = generate_corpus(
        &run_cfg,
        generation,
        Some(&out_dir.join("corpus.gen-cache.jsonl")),
    )?;
    stages.push(stage_of("generate", gen_stats.fully_cached()));

    let (embedded, embed_stats) = embed_corpus(
        corpus,
        &run_cfg,
        embedding,
        Some(&out_dir.join("corpus.embed-cache.jsonl")),
    )?;
    stages.push(stage_of("embed", embed_stats.fully_cached()));
    save_corpus(&embedded, &out_dir.join(CORPUS_FILE))?;

    let corpus_info = CorpusInfo {
        digest: corpus_digest(&embedded),
        records: embedded.len(),
    };
    let config_digest = config.digest();

    // Analysis + emit caching: reuse the previous report wholesale when the
    // corpus, the configuration and every emitted artifact are unchanged.
    if let Some(previous) = read_previous_report(&out_dir.join(SUMMARY_FILE)) {
        if previous.config_digest == config_digest
            && previous.corpus == corpus_info
            && outputs_intact(out_dir, &previous.outputs)
        {
            for stage in ["diversity", "tsne", "defaultism", "emit"] {
                stages.push(stage_of(stage, true));
            }
            return Ok(PipelineOutcome {
                report: previous,
                stages,
                warnings,
            });
        }
    }

    let grid = diversity_grid(&embedded)?;
    stages.push(stage_of("diversity", false));

    let layouts = project_per_culture(&embedded, &config.tsne_config())?;
    stages.push(stage_of("tsne", false));

    let outcomes = defaultism_table(&embedded, &config.test_config())?;
    for o in &outcomes {
        let threshold = o.outcome.permutations / 100;
        if o.outcome.degenerate_redraws > threshold {
            warnings.push(format!(
                "({}, {}): {} degenerate permutation redraws (> 1% of {} draws)",
                o.concept, o.culture, o.outcome.degenerate_redraws, o.outcome.permutations
            ));
        }
    }
    stages.push(stage_of("defaultism", false));

    let artifacts = render_artifacts(&grid, &layouts, &outcomes)?;
    let mut outputs = BTreeMap::new();
    for (name, bytes) in &artifacts {
        crate::corpus::write_file(&out_dir.join(name), bytes)?;
        outputs.insert(name.clone(), digest_of(bytes));
    }
    stages.push(stage_of("emit", false));

    let report = AuditReport {
        schema_version: SCHEMA_VERSION,
        config_digest,
        corpus: corpus_info,
        diversity: grid,
        defaultism: outcomes,
        layouts: layouts
            .into_iter()
            .map(|(culture, layout)| CultureLayout { culture, layout })
            .collect(),
        outputs,
        config: config.clone(),
    };
    let mut summary = serde_json::to_vec_pretty(&report)
        .map_err(|e| AuditError::Integrity(format!("serializing summary: {e}")))?;
    summary.push(b'\n');
    crate::corpus::write_file(&out_dir.join(SUMMARY_FILE), &summary)?;

    Ok(PipelineOutcome {
        report,
        stages,
        warnings,
    })
}
