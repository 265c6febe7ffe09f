//! Regenerates the committed fixture corpus, the replay-provider fixture,
//! the fixture audit configuration and the golden files under
//! `crates/audit-core/tests/golden/`.
//!
//! Deterministic end to end: rerunning writes identical bytes. The fixture
//! master seed is chosen by a deterministic search so the planted
//! defaultism arrows land exactly on the planted concepts (Time up,
//! Freedom down) with every unplanted cell quiet.
//!
//!     cargo run -p audit-core --example make_fixtures

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use audit_core::config::AuditConfig;
use audit_core::corpus::{
    corpus_digest, embed_corpus, generate_corpus, load_corpus, Corpus, ReplayProvider,
};
use audit_core::fixtures::{synth_corpus, PlantOffsets, PlantSpec};
use audit_core::randtest::Direction;
use audit_core::report::run_pipeline;

const CONCEPTS: [&str; 5] = ["Time", "Death", "Success", "Family", "Freedom"];
const CULTURES: [&str; 6] = ["Default", "U.S.", "Japan", "China", "India", "Brazil"];
const RUNS: usize = 20;
const DIM: usize = 64;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

fn plant_spec(seed: u64) -> PlantSpec {
    PlantSpec::new(DIM, 0.15, seed)
        .with_sigma_spread(0.8)
        .with_reference("U.S.")
        .plant(
            "Time",
            PlantOffsets {
                gap_reference: 0.08,
                gap_others: 0.5,
            },
        )
        .plant(
            "Freedom",
            PlantOffsets {
                gap_reference: 0.5,
                gap_others: 0.08,
            },
        )
}

fn grid_config(seed: u64) -> audit_core::corpus::RunConfig {
    audit_core::corpus::RunConfig {
        concepts: CONCEPTS
            .iter()
            .map(|c| audit_core::corpus::Concept::new(*c).unwrap())
            .collect(),
        cultures: CULTURES
            .iter()
            .map(|c| audit_core::corpus::CultureCondition::new(*c, *c == "Default").unwrap())
            .collect(),
        runs_per_pair: RUNS,
        embedding_dim: DIM,
        master_seed: seed,
        concurrency: 4,
        retry: Default::default(),
        strip_stem: false,
    }
}

/// Planted arrows must land exactly on the planted concepts.
fn arrows_are_clean(corpus: &Corpus) -> bool {
    let cfg = audit_core::randtest::TestConfig {
        permutations: 2_000,
        seed: 7,
        ..Default::default()
    };
    let outcomes = audit_core::randtest::defaultism_table(corpus, &cfg).expect("defaultism");
    outcomes.iter().all(|o| match o.concept.as_str() {
        "Time" => o.outcome.direction == Direction::Up,
        "Freedom" => o.outcome.direction == Direction::Down,
        _ => o.outcome.direction == Direction::None,
    })
}

fn write(path: &Path, bytes: &[u8]) {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).expect("mkdir");
    }
    std::fs::write(path, bytes).unwrap_or_else(|e| panic!("write {}: {e}", path.display()));
    println!("wrote {}", path.display());
}

/// Brute-force diversity oracle: re-reads the corpus file and loops over
/// all unordered pairs with naive arithmetic. Independent of the
/// diversity/geometry modules.
fn oracle_diversity_csv(corpus_path: &Path) -> String {
    let corpus = load_corpus(corpus_path).expect("fixture corpus loads");
    let mut cells: BTreeMap<(String, String), Vec<Vec<f64>>> = BTreeMap::new();
    let mut concepts: Vec<String> = Vec::new();
    let mut cultures: Vec<String> = Vec::new();
    for r in corpus.records() {
        if !concepts.contains(&r.concept) {
            concepts.push(r.concept.clone());
        }
        if !cultures.contains(&r.culture) {
            cultures.push(r.culture.clone());
        }
        cells
            .entry((r.concept.clone(), r.culture.clone()))
            .or_default()
            .push(r.embedding.as_ref().expect("embedded").values().to_vec());
    }

    let cosine = |a: &[f64], b: &[f64]| -> f64 {
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for i in 0..a.len() {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        1.0 - dot / (na.sqrt() * nb.sqrt())
    };

    let mut out = String::from("concept");
    for c in &cultures {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for k in &concepts {
        out.push_str(k);
        for c in &cultures {
            let vs = &cells[&(k.clone(), c.clone())];
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 0..vs.len() {
                for j in (i + 1)..vs.len() {
                    sum += cosine(&vs[i], &vs[j]);
                    pairs += 1;
                }
            }
            out.push(',');
            out.push_str(&format!("{}", sum / pairs as f64));
        }
        out.push('\n');
    }
    out
}

fn main() {
    let root = workspace_root();
    let fixtures_dir = root.join("fixtures");
    let golden_dir = root.join("crates/audit-core/tests/golden");

    // Deterministic seed search: first master seed whose planted arrows are
    // exactly the intended ones.
    let mut chosen = None;
    for seed in 1..200 {
        let corpus = synth_corpus(&grid_config(seed), &plant_spec(seed)).expect("synth");
        if arrows_are_clean(&corpus) {
            chosen = Some((seed, corpus));
            break;
        }
    }
    let (seed, synth) = chosen.expect("a clean seed below 200");
    println!("fixture master seed: {seed}");

    // Replay-provider fixture: (concept, culture, run) -> completion and
    // embedding, one JSON object per line.
    let mut replay = String::new();
    for r in synth.records() {
        let line = serde_json::json!({
            "concept": r.concept,
            "culture": r.culture,
            "run_index": r.run_index,
            "completion": r.completion,
            "embedding": r.embedding.as_ref().expect("embedded").values(),
        });
        replay.push_str(&serde_json::to_string(&line).unwrap());
        replay.push('\n');
    }
    write(&fixtures_dir.join("replay_600.jsonl"), replay.as_bytes());

    // The committed corpus is exactly what `generate` + `embed` produce
    // from that replay fixture.
    let provider = ReplayProvider::from_path(&fixtures_dir.join("replay_600.jsonl"))
        .expect("replay fixture loads");
    let config = grid_config(seed);
    let (generated, _) = generate_corpus(&config, &provider, None).expect("generate");
    let (embedded, _) = embed_corpus(generated, &config, &provider, None).expect("embed");
    audit_core::corpus::save_corpus(&embedded, &fixtures_dir.join("corpus_600.jsonl"))
        .expect("save corpus");
    println!(
        "wrote {} ({} records, digest {})",
        fixtures_dir.join("corpus_600.jsonl").display(),
        embedded.len(),
        corpus_digest(&embedded)
    );

    // Fixture audit configuration (paths relative to the config file).
    let audit_toml = format!(
        r#"# Offline audit over the committed synthetic fixture corpus.

[grid]
concepts = ["Time", "Death", "Success", "Family", "Freedom"]
cultures = ["Default", "U.S.", "Japan", "China", "India", "Brazil"]
default_culture = "Default"
runs_per_pair = {RUNS}
embedding_dim = {DIM}
master_seed = {seed}

[providers]
max_concurrent = 4
retries = 2
backoff_ms = 100

[providers.generation]
kind = "replay"
fixture = "replay_600.jsonl"

[providers.embedding]
kind = "replay"
fixture = "replay_600.jsonl"

[analysis]
permutations = 100000
seed = 7
perplexity = 15.0
iterations = 1000
early_exaggeration_factor = 12.0
early_exaggeration_iters = 250
learning_rate = 200.0
reference_culture = "U.S."

[output]
dir = "report"
"#
    );
    write(&fixtures_dir.join("audit.toml"), audit_toml.as_bytes());

    // Golden diversity grid from the independent brute-force oracle.
    let golden_csv = oracle_diversity_csv(&fixtures_dir.join("corpus_600.jsonl"));
    write(&golden_dir.join("diversity_oracle.csv"), golden_csv.as_bytes());

    // Golden report artifacts: the pipeline's own first verified run.
    let report_dir = tempfile_dir();
    let mut cfg = AuditConfig::load(&fixtures_dir.join("audit.toml")).expect("config");
    cfg.output.dir = report_dir.clone();
    let outcome = run_pipeline(&cfg, &provider, &provider).expect("pipeline");
    assert!(outcome.warnings.is_empty(), "unexpected pipeline warnings");
    for name in ["diversity.svg", "panels.svg", "defaultism.md", "tsne_Default.csv"] {
        let bytes = std::fs::read(report_dir.join(name)).expect("report artifact");
        write(&golden_dir.join(name), &bytes);
    }
    std::fs::remove_dir_all(&report_dir).ok();
    println!("done");
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("audit-fixture-report-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}
