//! Generation and embedding orchestration: bounded-concurrency provider
//! calls with retries, and a per-cell cache so interrupted runs resume
//! instead of re-spending API calls.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::provider::validate_embedding;
use super::{
    render_prompt, Corpus, EmbeddingProvider, EmbeddingRequest, GenerationProvider,
    GenerationRequest, MetaphorRecord, RetryPolicy, RunConfig,
};
use crate::error::{AuditError, CellFailure, Result};
use crate::geometry::EmbeddingVector;
use crate::rng::hash_str;

/// Counts of what a generation/embedding pass actually did.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerationStats {
    pub provider_calls: usize,
    pub cache_hits: usize,
}

impl GenerationStats {
    pub fn fully_cached(&self) -> bool {
        self.provider_calls == 0
    }
}

type Key = (String, String, usize);

fn retrying<T>(retry: &RetryPolicy, mut f: impl FnMut() -> Result<T>) -> Result<T> {
    let mut attempt = 0;
    loop {
        match f() {
            Ok(v) => return Ok(v),
            Err(_) if attempt < retry.max_retries => {
                // Exponential backoff, capped shift to avoid overflow.
                let backoff = retry.backoff_ms.saturating_mul(1 << attempt.min(16));
                std::thread::sleep(Duration::from_millis(backoff));
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Append-only JSON-lines cache, write-serialized behind a mutex.
struct CacheWriter {
    file: Mutex<std::fs::File>,
    path: PathBuf,
}

impl CacheWriter {
    fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| AuditError::io(parent, e))?;
            }
        }
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| AuditError::io(path, e))?;
        Ok(CacheWriter {
            file: Mutex::new(file),
            path: path.to_path_buf(),
        })
    }

    fn append<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut line = serde_json::to_string(value)
            .map_err(|e| AuditError::Integrity(format!("serializing cache entry: {e}")))?;
        line.push('\n');
        let mut file = self.file.lock().expect("cache mutex");
        file.write_all(line.as_bytes())
            .map_err(|e| AuditError::io(&self.path, e))
    }
}

fn read_cache_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = std::fs::File::open(path).map_err(|e| AuditError::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| AuditError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| AuditError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            detail: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Run `jobs` through `work` on up to `limit` worker threads, preserving
/// determinism by keying results rather than relying on completion order.
fn run_pool<J: Sync, T: Send>(
    jobs: &[J],
    limit: usize,
    work: impl Fn(&J) -> T + Sync,
) -> Vec<T> {
    let workers = limit.max(1).min(jobs.len().max(1));
    let cursor = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<T>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let cursor = &cursor;
            let work = &work;
            scope.spawn(move || loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                if tx.send(work(&jobs[i])).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        rx.into_iter().collect()
    })
}

struct GenJob {
    concept: String,
    culture: String,
    run_index: usize,
    prompt: String,
}

/// Generate the full audit grid: exactly one record per
/// (concept, culture, run_index). Completed cells are appended to
/// `cache_path` as they finish, and reruns reuse any cached record whose
/// (prompt, model) still matches, so a complete cache costs zero provider
/// calls. Any cell that still fails after retries aborts the run with the
/// full list of missing cells.
pub fn generate_corpus(
    config: &RunConfig,
    provider: &dyn GenerationProvider,
    cache_path: Option<&Path>,
) -> Result<(Corpus, GenerationStats)> {
    config.validate()?;

    let mut cached: HashMap<Key, MetaphorRecord> = HashMap::new();
    if let Some(path) = cache_path {
        for record in read_cache_lines::<MetaphorRecord>(path)? {
            cached.insert(
                (record.concept.clone(), record.culture.clone(), record.run_index),
                record,
            );
        }
    }
    let writer = cache_path.map(CacheWriter::open).transpose()?;

    let mut done: HashMap<Key, MetaphorRecord> = HashMap::new();
    let mut jobs = Vec::new();
    let mut cache_hits = 0;
    for (concept, culture, run_index) in config.cells() {
        let prompt = render_prompt(concept, culture);
        let key = (concept.name().to_string(), culture.name.clone(), run_index);
        match cached.get(&key) {
            // Content-addressed reuse: coordinates, prompt and model id all
            // have to match, otherwise the entry is stale.
            Some(r) if r.prompt == prompt && r.model == provider.model_id() => {
                cache_hits += 1;
                done.insert(key, r.clone());
            }
            _ => jobs.push(GenJob {
                concept: concept.name().to_string(),
                culture: culture.name.clone(),
                run_index,
                prompt,
            }),
        }
    }

    let provider_calls = jobs.len();
    let writer_ref = writer.as_ref();
    let results = run_pool(&jobs, config.concurrency, |job| {
        let outcome = retrying(&config.retry, || {
            provider.generate(&GenerationRequest {
                concept: &job.concept,
                culture: &job.culture,
                run_index: job.run_index,
                prompt: &job.prompt,
            })
        });
        match outcome {
            Ok(out) if out.completion.trim().is_empty() => Err(CellFailure {
                concept: job.concept.clone(),
                culture: job.culture.clone(),
                run_index: job.run_index,
                cause: "provider returned an empty completion".into(),
            }),
            Ok(out) => {
                let record = MetaphorRecord {
                    concept: job.concept.clone(),
                    culture: job.culture.clone(),
                    run_index: job.run_index,
                    prompt: job.prompt.clone(),
                    completion: out.completion,
                    model: out.model,
                    timestamp: out.timestamp,
                    embedding: None,
                };
                if let Some(w) = writer_ref {
                    if let Err(e) = w.append(&record) {
                        return Err(CellFailure {
                            concept: job.concept.clone(),
                            culture: job.culture.clone(),
                            run_index: job.run_index,
                            cause: format!("cache write failed: {e}"),
                        });
                    }
                }
                Ok(record)
            }
            Err(e) => Err(CellFailure {
                concept: job.concept.clone(),
                culture: job.culture.clone(),
                run_index: job.run_index,
                cause: e.to_string(),
            }),
        }
    });

    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(record) => {
                done.insert(
                    (record.concept.clone(), record.culture.clone(), record.run_index),
                    record,
                );
            }
            Err(f) => failures.push(f),
        }
    }
    if !failures.is_empty() {
        failures.sort_by(|a, b| {
            (&a.concept, &a.culture, a.run_index).cmp(&(&b.concept, &b.culture, b.run_index))
        });
        return Err(AuditError::CellFailures { failures });
    }

    // Assemble in grid order regardless of completion order.
    let mut records = Vec::with_capacity(done.len());
    for (concept, culture, run_index) in config.cells() {
        let key = (concept.name().to_string(), culture.name.clone(), run_index);
        records.push(done.remove(&key).expect("no failures means every cell present"));
    }
    Ok((
        Corpus::new(records)?,
        GenerationStats {
            provider_calls,
            cache_hits,
        },
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbedCacheEntry {
    concept: String,
    culture: String,
    run_index: usize,
    input_hash: String,
    model: String,
    embedding: Vec<f64>,
}

/// Attach an embedding to every record. Records already carrying a vector
/// of the right dimension are kept; the sidecar cache covers resumption
/// after an interrupted pass. Dimension mismatches and zero vectors are
/// hard errors naming the record.
pub fn embed_corpus(
    corpus: Corpus,
    config: &RunConfig,
    provider: &dyn EmbeddingProvider,
    cache_path: Option<&Path>,
) -> Result<(Corpus, GenerationStats)> {
    for r in corpus.records() {
        if r.completion.trim().is_empty() {
            return Err(AuditError::Integrity(format!(
                "record ({}, {}, run {}) has no completion; generate before embedding",
                r.concept, r.culture, r.run_index
            )));
        }
    }

    let mut cached: HashMap<Key, EmbedCacheEntry> = HashMap::new();
    if let Some(path) = cache_path {
        for entry in read_cache_lines::<EmbedCacheEntry>(path)? {
            cached.insert(
                (entry.concept.clone(), entry.culture.clone(), entry.run_index),
                entry,
            );
        }
    }
    let writer = cache_path.map(CacheWriter::open).transpose()?;

    let mut stats = GenerationStats::default();
    let mut resolved: HashMap<Key, EmbeddingVector> = HashMap::new();
    let mut jobs: Vec<&MetaphorRecord> = Vec::new();
    for r in corpus.records() {
        let key = (r.concept.clone(), r.culture.clone(), r.run_index);
        if let Some(existing) = &r.embedding {
            if existing.dim() != config.embedding_dim {
                return Err(AuditError::DimensionMismatch {
                    expected: config.embedding_dim,
                    got: existing.dim(),
                    context: Some(format!(
                        "existing embedding for ({}, {}, run {})",
                        r.concept, r.culture, r.run_index
                    )),
                });
            }
            stats.cache_hits += 1;
            continue;
        }
        let input_hash = format!("{:016x}", hash_str(r.embedding_input(config.strip_stem)));
        match cached.get(&key) {
            Some(e) if e.input_hash == input_hash && e.model == provider.model_id() => {
                let vector = validate_embedding(
                    e.embedding.clone(),
                    config.embedding_dim,
                    &r.concept,
                    &r.culture,
                    r.run_index,
                )?;
                stats.cache_hits += 1;
                resolved.insert(key, vector);
            }
            _ => jobs.push(r),
        }
    }

    stats.provider_calls = jobs.len();
    let writer_ref = writer.as_ref();
    let strip_stem = config.strip_stem;
    let results = run_pool(&jobs, config.concurrency, |record| {
        let text = record.embedding_input(strip_stem);
        let raw = retrying(&config.retry, || {
            provider.embed(&EmbeddingRequest {
                concept: &record.concept,
                culture: &record.culture,
                run_index: record.run_index,
                text,
            })
        })?;
        let vector = validate_embedding(
            raw,
            config.embedding_dim,
            &record.concept,
            &record.culture,
            record.run_index,
        )?;
        if let Some(w) = writer_ref {
            w.append(&EmbedCacheEntry {
                concept: record.concept.clone(),
                culture: record.culture.clone(),
                run_index: record.run_index,
                input_hash: format!("{:016x}", hash_str(text)),
                model: provider.model_id().to_string(),
                embedding: vector.values().to_vec(),
            })?;
        }
        Ok((
            (record.concept.clone(), record.culture.clone(), record.run_index),
            vector,
        ))
    });

    for result in results {
        let (key, vector): (Key, EmbeddingVector) = result?;
        resolved.insert(key, vector);
    }

    let records = corpus
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if r.embedding.is_none() {
                let key = (r.concept.clone(), r.culture.clone(), r.run_index);
                r.embedding = Some(resolved.remove(&key).expect("every record resolved"));
            }
            r
        })
        .collect();
    Ok((Corpus::new(records)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::provider::GenerationOutput;
    use crate::corpus::{Concept, CultureCondition};
    use std::sync::atomic::AtomicUsize;

    fn config(concepts: &[&str], cultures: &[&str], runs: usize) -> RunConfig {
        RunConfig {
            concepts: concepts.iter().map(|c| Concept::new(*c).unwrap()).collect(),
            cultures: cultures
                .iter()
                .enumerate()
                .map(|(i, c)| CultureCondition::new(*c, i == 0).unwrap())
                .collect(),
            runs_per_pair: runs,
            embedding_dim: 4,
            master_seed: 1,
            concurrency: 3,
            retry: RetryPolicy {
                max_retries: 2,
                backoff_ms: 0,
            },
            strip_stem: false,
        }
    }

    /// Deterministic in-process provider that counts calls and can fail the
    /// first `fail_first` requests it sees.
    struct CountingProvider {
        calls: AtomicUsize,
        fail_first: usize,
    }

    impl CountingProvider {
        fn new(fail_first: usize) -> Self {
            CountingProvider {
                calls: AtomicUsize::new(0),
                fail_first,
            }
        }

        fn calls(&self) -> usize {
            self.calls.load(Ordering::SeqCst)
        }
    }

    impl GenerationProvider for CountingProvider {
        fn generate(&self, req: &GenerationRequest<'_>) -> Result<GenerationOutput> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                return Err(AuditError::Provider("synthetic outage".into()));
            }
            Ok(GenerationOutput {
                completion: format!(
                    "{} is like completion {}/{}.",
                    req.concept, req.culture, req.run_index
                ),
                model: "counting".into(),
                timestamp: "1970-01-01T00:00:00Z".into(),
            })
        }

        fn model_id(&self) -> &str {
            "counting"
        }
    }

    impl EmbeddingProvider for CountingProvider {
        fn embed(&self, req: &EmbeddingRequest<'_>) -> Result<Vec<f64>> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let h = hash_str(req.text) as f64 / u64::MAX as f64;
            Ok(vec![1.0, h, req.run_index as f64, 0.5])
        }

        fn model_id(&self) -> &str {
            "counting"
        }
    }

    #[test]
    fn grid_is_complete_and_prompts_match() {
        let cfg = config(&["Time", "Death"], &["Default", "Japan", "Brazil"], 2);
        let provider = CountingProvider::new(0);
        let (corpus, stats) = generate_corpus(&cfg, &provider, None).unwrap();
        assert_eq!(corpus.len(), 12);
        assert_eq!(stats.provider_calls, 12);
        for ((concept, culture, run), record) in cfg.cells().zip(corpus.records()) {
            assert_eq!(record.concept, concept.name());
            assert_eq!(record.culture, culture.name);
            assert_eq!(record.run_index, run);
            assert_eq!(record.prompt, render_prompt(concept, culture));
        }
    }

    #[test]
    fn rerun_over_complete_cache_makes_zero_calls() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("gen.cache.jsonl");
        let cfg = config(&["Time"], &["Default", "Japan"], 2);

        let first = CountingProvider::new(0);
        let (corpus1, stats1) = generate_corpus(&cfg, &first, Some(&cache)).unwrap();
        assert_eq!(stats1.provider_calls, 4);

        let second = CountingProvider::new(0);
        let (corpus2, stats2) = generate_corpus(&cfg, &second, Some(&cache)).unwrap();
        assert_eq!(second.calls(), 0);
        assert_eq!(stats2.provider_calls, 0);
        assert_eq!(stats2.cache_hits, 4);
        assert!(stats2.fully_cached());
        assert_eq!(corpus1, corpus2);
    }

    #[test]
    fn failures_abort_with_missing_cells_listed() {
        let cfg = config(&["Time"], &["Default", "Japan"], 2);
        // Fails every attempt for every cell: 4 cells x (1 + 2 retries).
        let provider = CountingProvider::new(1000);
        let err = generate_corpus(&cfg, &provider, None).unwrap_err();
        match err {
            AuditError::CellFailures { failures } => assert_eq!(failures.len(), 4),
            other => panic!("expected cell failures, got {other}"),
        }
        assert_eq!(provider.calls(), 12);
    }

    /// Succeeds like CountingProvider but always fails one culture's cells.
    struct CultureOutage(&'static str);

    impl GenerationProvider for CultureOutage {
        fn generate(&self, req: &GenerationRequest<'_>) -> Result<GenerationOutput> {
            if req.culture == self.0 {
                return Err(AuditError::Provider("synthetic outage".into()));
            }
            CountingProvider::new(0).generate(req)
        }
        fn model_id(&self) -> &str {
            "counting"
        }
    }

    #[test]
    fn interrupted_run_resumes_to_identical_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(&["Time"], &["Default", "Japan"], 3);

        // Uninterrupted reference run.
        let (reference, _) =
            generate_corpus(&cfg, &CountingProvider::new(0), Some(&dir.path().join("a"))).unwrap();

        // Interrupted run: one culture's cells fail after retries, the other
        // culture's records land in the cache; then a clean resume.
        let cache = dir.path().join("b");
        let err = generate_corpus(&cfg, &CultureOutage("Japan"), Some(&cache)).unwrap_err();
        match err {
            AuditError::CellFailures { failures } => {
                assert_eq!(failures.len(), 3);
                assert!(failures.iter().all(|f| f.culture == "Japan"));
            }
            other => panic!("expected cell failures, got {other}"),
        }
        let resume = CountingProvider::new(0);
        let (resumed, stats) = generate_corpus(&cfg, &resume, Some(&cache)).unwrap();
        assert_eq!(stats.cache_hits, 3);
        assert_eq!(resume.calls(), 3);
        assert_eq!(reference, resumed);
    }

    #[test]
    fn retry_succeeds_after_transient_failures() {
        let cfg = config(&["Time"], &["Default", "Japan"], 2);
        // 2 failures, then successes: first job retries through them.
        let provider = CountingProvider::new(2);
        let (corpus, _) = generate_corpus(&cfg, &provider, None).unwrap();
        assert_eq!(corpus.len(), 4);
    }

    #[test]
    fn concurrent_equals_serial() {
        let mut cfg = config(&["Time", "Death"], &["Default", "Japan", "US"], 4);
        let (serial, _) = {
            cfg.concurrency = 1;
            generate_corpus(&cfg, &CountingProvider::new(0), None).unwrap()
        };
        cfg.concurrency = 8;
        let (parallel, _) = generate_corpus(&cfg, &CountingProvider::new(0), None).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn embed_fills_every_record_and_caches() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("embed.cache.jsonl");
        let cfg = config(&["Time"], &["Default", "Japan"], 2);
        let (corpus, _) = generate_corpus(&cfg, &CountingProvider::new(0), None).unwrap();

        let embedder = CountingProvider::new(0);
        let (embedded, stats) = embed_corpus(corpus.clone(), &cfg, &embedder, Some(&cache)).unwrap();
        assert_eq!(stats.provider_calls, 4);
        assert!(embedded.records().iter().all(|r| r.embedding.is_some()));

        let again = CountingProvider::new(0);
        let (embedded2, stats2) = embed_corpus(corpus, &cfg, &again, Some(&cache)).unwrap();
        assert_eq!(again.calls(), 0);
        assert!(stats2.fully_cached());
        assert_eq!(embedded, embedded2);
    }

    #[test]
    fn embed_empty_corpus_is_empty() {
        let cfg = config(&["Time"], &["Default", "Japan"], 2);
        let (out, stats) =
            embed_corpus(Corpus::default(), &cfg, &CountingProvider::new(0), None).unwrap();
        assert!(out.is_empty());
        assert_eq!(stats, GenerationStats::default());
    }

    struct BadDimEmbedder;
    impl EmbeddingProvider for BadDimEmbedder {
        fn embed(&self, _req: &EmbeddingRequest<'_>) -> Result<Vec<f64>> {
            Ok(vec![1.0, 2.0])
        }
        fn model_id(&self) -> &str {
            "bad-dim"
        }
    }

    struct ZeroEmbedder;
    impl EmbeddingProvider for ZeroEmbedder {
        fn embed(&self, _req: &EmbeddingRequest<'_>) -> Result<Vec<f64>> {
            Ok(vec![0.0; 4])
        }
        fn model_id(&self) -> &str {
            "zero"
        }
    }

    #[test]
    fn embed_dimension_mismatch_names_record() {
        let cfg = config(&["Time"], &["Default", "Japan"], 2);
        let (corpus, _) = generate_corpus(&cfg, &CountingProvider::new(0), None).unwrap();
        let err = embed_corpus(corpus, &cfg, &BadDimEmbedder, None).unwrap_err();
        match err {
            AuditError::DimensionMismatch { expected, got, context } => {
                assert_eq!((expected, got), (4, 2));
                assert!(context.unwrap().contains("Time"));
            }
            other => panic!("expected dimension mismatch, got {other}"),
        }
    }

    #[test]
    fn embed_zero_vector_is_hard_error() {
        let cfg = config(&["Time"], &["Default", "Japan"], 2);
        let (corpus, _) = generate_corpus(&cfg, &CountingProvider::new(0), None).unwrap();
        let err = embed_corpus(corpus, &cfg, &ZeroEmbedder, None).unwrap_err();
        assert!(matches!(err, AuditError::ZeroNorm { .. }));
    }

    #[test]
    fn replay_fixture_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let fixture = dir.path().join("replay.jsonl");
        // Unit basis embeddings, exactly as the fixture states them.
        std::fs::write(
            &fixture,
            concat!(
                r#"{"concept":"Time","culture":"Default","run_index":0,"completion":"Time is like a.","embedding":[1.0,0.0,0.0,0.0]}"#, "\n",
                r#"{"concept":"Time","culture":"Default","run_index":1,"completion":"Time is like b.","embedding":[0.0,1.0,0.0,0.0]}"#, "\n",
                r#"{"concept":"Time","culture":"Japan","run_index":0,"completion":"Time is like c.","embedding":[0.0,0.0,1.0,0.0]}"#, "\n",
                r#"{"concept":"Time","culture":"Japan","run_index":1,"completion":"Time is like d.","embedding":[0.0,0.0,0.0,1.0]}"#, "\n",
            ),
        )
        .unwrap();
        let replay = crate::corpus::ReplayProvider::from_path(&fixture).unwrap();
        let cfg = config(&["Time"], &["Default", "Japan"], 2);
        let (corpus, _) = generate_corpus(&cfg, &replay, None).unwrap();
        assert_eq!(corpus.records()[0].completion, "Time is like a.");
        let (embedded, _) = embed_corpus(corpus, &cfg, &replay, None).unwrap();
        assert_eq!(
            embedded.records()[0].embedding.as_ref().unwrap().values(),
            &[1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            embedded.records()[3].embedding.as_ref().unwrap().values(),
            &[0.0, 0.0, 0.0, 1.0]
        );
    }
}
