//! `audit` — cultural-inclusivity metaphor audit CLI.
//!
//! Exit codes: 0 success, 1 configuration error, 2 provider error,
//! 3 analysis/data error.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use audit_cli::commands;

#[derive(Parser)]
#[command(
    name = "audit",
    about = "Measure cultural inclusivity of LLM-generated metaphors",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the metaphor corpus over the configured grid.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Corpus output file (JSON lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Attach sentence embeddings to every record of a corpus.
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        /// Audit configuration naming the embedding provider.
        #[arg(long)]
        config: PathBuf,
        /// Embed the bare metaphor, stripping the "<Concept> is like "
        /// sentence stem.
        #[arg(long)]
        strip_stem: bool,
    },
    /// Run the full pipeline: generate, embed, analyses, report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analysis I: intra-cultural semantic diversity grid.
    Diversity {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Analysis II: per-culture t-SNE projections.
    Tsne {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 15.0)]
        perplexity: f64,
    },
    /// Analysis III: cultural-defaultism randomization test.
    Defaultism {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        permutations: usize,
        /// Culture the default condition is compared against.
        #[arg(long, default_value = "U.S.")]
        reference_culture: String,
        /// Bonferroni-adjust p-values across table cells.
        #[arg(long)]
        bonferroni: bool,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors; anything else is a
            // configuration problem.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let result = match &cli.command {
        Command::Generate { config, out } => commands::cmd_generate(config, out),
        Command::Embed {
            corpus,
            config,
            strip_stem,
        } => commands::cmd_embed(corpus, config, *strip_stem),
        Command::Run { config, out } => commands::cmd_run(config, out.as_deref()),
        Command::Diversity { corpus, out } => commands::cmd_diversity(corpus, out),
        Command::Tsne {
            corpus,
            out,
            seed,
            perplexity,
        } => commands::cmd_tsne(corpus, out, *seed, *perplexity),
        Command::Defaultism {
            corpus,
            out,
            seed,
            permutations,
            reference_culture,
            bonferroni,
        } => commands::cmd_defaultism(
            corpus,
            out,
            *seed,
            *permutations,
            reference_culture,
            *bonferroni,
        ),
    };

    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
