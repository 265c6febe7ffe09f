//! Corpus persistence: JSON-lines files, one record per line, with
//! embeddings round-tripped exactly (shortest-roundtrip decimal text).

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Corpus, MetaphorRecord};
use crate::error::{AuditError, Result};

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for record in corpus.records() {
        serde_json::to_writer(&mut buf, record)
            .map_err(|e| AuditError::Integrity(format!("serializing record: {e}")))?;
        buf.push(b'\n');
    }
    write_atomically(path, &buf)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| AuditError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| AuditError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MetaphorRecord =
            serde_json::from_str(&line).map_err(|e| AuditError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                detail: e.to_string(),
            })?;
        records.push(record);
    }
    Corpus::new(records)
}

/// FNV-1a digest of a corpus' canonical serialization; used for stage
/// caching and report provenance.
pub fn corpus_digest(corpus: &Corpus) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for record in corpus.records() {
        let line = serde_json::to_string(record).expect("record serializes");
        eat(line.as_bytes());
        eat(b"\n");
    }
    format!("{h:016x}")
}

/// Write via a sibling temp file and rename, so failed stages never leave
/// partial output behind.
pub(crate) fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| AuditError::io(parent, e))?;
        }
    }
    let tmp = path.with_extension("tmp.partial");
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| AuditError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| AuditError::io(&tmp, e))?;
        f.sync_all().map_err(|e| AuditError::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| AuditError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EmbeddingVector;

    fn record(concept: &str, run: usize, embedding: Option<Vec<f64>>) -> MetaphorRecord {
        MetaphorRecord {
            concept: concept.into(),
            culture: "Japan".into(),
            run_index: run,
            prompt: format!("prompt {concept} {run}"),
            completion: format!("{concept} is like metaphor {run}."),
            model: "test-model".into(),
            timestamp: "1970-01-01T00:00:00Z".into(),
            embedding: embedding.map(|v| EmbeddingVector::new(v).unwrap()),
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let corpus = Corpus::new(vec![
            record("Time", 0, Some(vec![0.1, -0.25, 1e-17, 3.0])),
            record("Time", 1, None),
            record("Death", 0, Some(vec![std::f64::consts::PI, 1.0 / 3.0, -0.0, 2.0])),
        ])
        .unwrap();
        save_corpus(&corpus, &path).unwrap();
        let loaded = load_corpus(&path).unwrap();
        assert_eq!(corpus, loaded);
    }

    #[test]
    fn duplicate_key_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let line = serde_json::to_string(&record("Time", 0, None)).unwrap();
        std::fs::write(&path, format!("{line}\n{line}\n")).unwrap();
        assert!(matches!(load_corpus(&path), Err(AuditError::Integrity(_))));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let good = serde_json::to_string(&record("Time", 0, None)).unwrap();
        std::fs::write(&path, format!("{good}\nnot json\n")).unwrap();
        match load_corpus(&path) {
            Err(AuditError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn digest_changes_with_content() {
        let a = Corpus::new(vec![record("Time", 0, None)]).unwrap();
        let b = Corpus::new(vec![record("Time", 1, None)]).unwrap();
        assert_ne!(corpus_digest(&a), corpus_digest(&b));
        assert_eq!(corpus_digest(&a), corpus_digest(&a.clone()));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn embeddings_round_trip_exactly(
                values in proptest::collection::vec(-1e6f64..1e6, 1..32)
            ) {
                prop_assume!(values.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.0);
                let dir = tempfile::tempdir().unwrap();
                let path = dir.path().join("c.jsonl");
                let corpus = Corpus::new(vec![record("Time", 0, Some(values))]).unwrap();
                save_corpus(&corpus, &path).unwrap();
                prop_assert_eq!(load_corpus(&path).unwrap(), corpus);
            }
        }
    }
}
