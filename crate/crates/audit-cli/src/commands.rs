//! Implementations of the audit subcommands.

use std::path::{Path, PathBuf};

use audit_core::config::{AuditConfig, ProviderSection};
use audit_core::corpus::{
    embed_corpus, generate_corpus, load_corpus, save_corpus, EmbeddingProvider,
    GenerationProvider, ReplayProvider,
};
use audit_core::diversity::{diversity_grid, rank_cells, RankOrder};
use audit_core::error::Result;
use audit_core::projection::{project_per_culture, TsneConfig};
use audit_core::randtest::{defaultism_table, TestConfig};
use audit_core::report::{
    defaultism_markdown, emit_defaultism_table, emit_heatmap, emit_scatter_panels, run_pipeline,
    StageState,
};

enum Provider {
    Replay(ReplayProvider),
    Http(crate::http_provider::HttpProvider),
}

impl Provider {
    fn build(section: &ProviderSection) -> Result<Provider> {
        match section {
            ProviderSection::Replay { fixture } => {
                Ok(Provider::Replay(ReplayProvider::from_path(fixture)?))
            }
            ProviderSection::Http {
                base_url,
                auth_env,
                model,
            } => Ok(Provider::Http(crate::http_provider::HttpProvider::new(
                base_url,
                model,
                auth_env.as_deref(),
            )?)),
        }
    }

    fn generation(&self) -> &dyn GenerationProvider {
        match self {
            Provider::Replay(p) => p,
            Provider::Http(p) => p,
        }
    }

    fn embedding(&self) -> &dyn EmbeddingProvider {
        match self {
            Provider::Replay(p) => p,
            Provider::Http(p) => p,
        }
    }
}

fn sibling_cache(path: &Path, tag: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.push('.');
    name.push_str(tag);
    path.with_file_name(name)
}

pub fn cmd_generate(config_path: &Path, out: &Path) -> Result<()> {
    let config = AuditConfig::load(config_path)?;
    let run_cfg = config.run_config()?;
    let provider = Provider::build(&config.providers.generation)?;
    let cache = sibling_cache(out, "gen-cache.jsonl");
    let (corpus, stats) = generate_corpus(&run_cfg, provider.generation(), Some(&cache))?;
    save_corpus(&corpus, out)?;
    println!(
        "generated {} records ({} provider calls, {} cache hits) -> {}",
        corpus.len(),
        stats.provider_calls,
        stats.cache_hits,
        out.display()
    );
    Ok(())
}

pub fn cmd_embed(corpus_path: &Path, config_path: &Path, strip_stem: bool) -> Result<()> {
    let config = AuditConfig::load(config_path)?;
    let mut run_cfg = config.run_config()?;
    if strip_stem {
        run_cfg.strip_stem = true;
    }
    let provider = Provider::build(&config.providers.embedding)?;
    let corpus = load_corpus(corpus_path)?;
    let cache = sibling_cache(corpus_path, "embed-cache.jsonl");
    let (embedded, stats) = embed_corpus(corpus, &run_cfg, provider.embedding(), Some(&cache))?;
    save_corpus(&embedded, corpus_path)?;
    println!(
        "embedded {} records ({} provider calls, {} cache hits) -> {}",
        embedded.len(),
        stats.provider_calls,
        stats.cache_hits,
        corpus_path.display()
    );
    Ok(())
}

pub fn cmd_run(config_path: &Path, out_override: Option<&Path>) -> Result<()> {
    let mut config = AuditConfig::load(config_path)?;
    if let Some(dir) = out_override {
        config.output.dir = dir.to_path_buf();
    }
    let generation = Provider::build(&config.providers.generation)?;
    let embedding = Provider::build(&config.providers.embedding)?;
    let outcome = run_pipeline(&config, generation.generation(), embedding.embedding())?;
    for stage in &outcome.stages {
        let state = match stage.state {
            StageState::Cached => "cached",
            StageState::Computed => "computed",
        };
        println!("stage {:<12} {state}", stage.stage);
    }
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "report: {} ({} records, corpus digest {})",
        config.output.dir.display(),
        outcome.report.corpus.records,
        outcome.report.corpus.digest
    );
    Ok(())
}

pub fn cmd_diversity(corpus_path: &Path, out: &Path) -> Result<()> {
    let corpus = load_corpus(corpus_path)?;
    let grid = diversity_grid(&corpus)?;
    emit_heatmap(&grid, out)?;
    println!(
        "diversity grid {} concepts x {} cultures -> {}",
        grid.concepts.len(),
        grid.cultures.len(),
        out.display()
    );
    println!("lowest-diversity cells (collapse candidates):");
    for (concept, culture, value) in rank_cells(&grid, RankOrder::Ascending).into_iter().take(5) {
        println!("  {concept:<12} {culture:<12} {value:.3}");
    }
    Ok(())
}

pub fn cmd_tsne(corpus_path: &Path, out: &Path, seed: u64, perplexity: f64) -> Result<()> {
    let corpus = load_corpus(corpus_path)?;
    let cfg = TsneConfig {
        seed,
        perplexity,
        ..TsneConfig::default()
    };
    let layouts = project_per_culture(&corpus, &cfg)?;
    emit_scatter_panels(&layouts, out)?;
    for (culture, layout) in &layouts {
        println!(
            "tsne {culture}: {} points, final KL {:.4}",
            layout.points.len(),
            layout.final_kl
        );
    }
    println!("panels -> {}", out.join("panels.svg").display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_defaultism(
    corpus_path: &Path,
    out: &Path,
    seed: u64,
    permutations: usize,
    reference_culture: &str,
    bonferroni: bool,
) -> Result<()> {
    let corpus = load_corpus(corpus_path)?;
    let cfg = TestConfig {
        permutations,
        seed,
        bonferroni,
        reference_culture: reference_culture.to_string(),
        ..TestConfig::default()
    };
    let outcomes = defaultism_table(&corpus, &cfg)?;
    emit_defaultism_table(&outcomes, out)?;
    print!("{}", defaultism_markdown(&outcomes)?);
    Ok(())
}
