//! HTTP provider behavior against a local canned-response server: request
//! shape, auth header, retry-after-5xx through the orchestration layer.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use audit_cli::http_provider::HttpProvider;
use audit_core::corpus::{
    generate_corpus, Concept, CultureCondition, EmbeddingProvider, EmbeddingRequest,
    GenerationProvider, GenerationRequest, RetryPolicy, RunConfig,
};

/// Minimal one-thread HTTP server: answers `hits` requests then stops.
/// Requests before `fail_first` get a 500.
fn spawn_server(hits: usize, fail_first: usize) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind localhost");
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(AtomicUsize::new(0));
    let seen_clone = seen.clone();

    std::thread::spawn(move || {
        for _ in 0..hits {
            let (mut stream, _) = match listener.accept() {
                Ok(s) => s,
                Err(_) => return,
            };
            let mut buf = Vec::new();
            let mut chunk = [0u8; 1024];
            // Read headers, then the content-length body.
            let body_start = loop {
                let n = stream.read(&mut chunk).unwrap_or(0);
                if n == 0 {
                    break None;
                }
                buf.extend_from_slice(&chunk[..n]);
                if let Some(pos) = find_header_end(&buf) {
                    break Some(pos);
                }
            };
            let Some(body_start) = body_start else { return };
            let header_text = String::from_utf8_lossy(&buf[..body_start]).into_owned();
            let content_length = header_text
                .lines()
                .find_map(|l| {
                    let (k, v) = l.split_once(':')?;
                    k.eq_ignore_ascii_case("content-length")
                        .then(|| v.trim().parse::<usize>().ok())?
                })
                .unwrap_or(0);
            while buf.len() < body_start + content_length {
                let n = stream.read(&mut chunk).unwrap_or(0);
                if n == 0 {
                    break;
                }
                buf.extend_from_slice(&chunk[..n]);
            }

            let count = seen_clone.fetch_add(1, Ordering::SeqCst);
            let (status, body) = if count < fail_first {
                ("500 Internal Server Error", "{\"error\":\"synthetic\"}".to_string())
            } else if header_text.starts_with("POST /generate") {
                let auth_ok = header_text.lines().any(|l| l == "authorization: Bearer sekret"
                    || l == "Authorization: Bearer sekret");
                let completion = if auth_ok {
                    "Time is like a spiral staircase."
                } else {
                    "UNAUTHENTICATED"
                };
                ("200 OK", format!("{{\"completion\":\"{completion}\"}}"))
            } else {
                ("200 OK", "{\"embedding\":[1.0,0.25,0.5,0.125]}".to_string())
            };
            let response = format!(
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    (format!("http://{addr}"), seen)
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n").map(|p| p + 4)
}

#[test]
fn generate_and_embed_round_trip_with_auth() {
    std::env::set_var("AUDIT_TEST_TOKEN", "sekret");
    let (base_url, seen) = spawn_server(2, 0);
    let provider = HttpProvider::new(&base_url, "test-model", Some("AUDIT_TEST_TOKEN")).unwrap();

    let generated = provider
        .generate(&GenerationRequest {
            concept: "Time",
            culture: "Japan",
            run_index: 0,
            prompt: "p",
        })
        .unwrap();
    assert_eq!(generated.completion, "Time is like a spiral staircase.");
    assert_eq!(generated.model, "test-model");
    assert!(generated.timestamp.ends_with('Z'));

    let embedding = provider
        .embed(&EmbeddingRequest {
            concept: "Time",
            culture: "Japan",
            run_index: 0,
            text: "Time is like a spiral staircase.",
        })
        .unwrap();
    assert_eq!(embedding, vec![1.0, 0.25, 0.5, 0.125]);
    assert_eq!(seen.load(Ordering::SeqCst), 2);
}

#[test]
fn orchestration_retries_through_transient_500s() {
    let (base_url, seen) = spawn_server(6, 2);
    let provider = HttpProvider::new(&base_url, "test-model", None).unwrap();
    let config = RunConfig {
        concepts: vec![Concept::new("Time").unwrap()],
        cultures: vec![
            CultureCondition::new("Default", true).unwrap(),
            CultureCondition::new("Japan", false).unwrap(),
        ],
        runs_per_pair: 2,
        embedding_dim: 4,
        master_seed: 0,
        concurrency: 1,
        retry: RetryPolicy {
            max_retries: 2,
            backoff_ms: 1,
        },
        strip_stem: false,
    };
    let (corpus, stats) = generate_corpus(&config, &provider, None).unwrap();
    assert_eq!(corpus.len(), 4);
    assert_eq!(stats.provider_calls, 4);
    // 4 successful calls plus 2 retried failures.
    assert_eq!(seen.load(Ordering::SeqCst), 6);
}

#[test]
fn exhausted_retries_surface_as_cell_failures() {
    let (base_url, _) = spawn_server(8, 1_000);
    let provider = HttpProvider::new(&base_url, "test-model", None).unwrap();
    let config = RunConfig {
        concepts: vec![Concept::new("Time").unwrap()],
        cultures: vec![
            CultureCondition::new("Default", true).unwrap(),
            CultureCondition::new("Japan", false).unwrap(),
        ],
        runs_per_pair: 2,
        embedding_dim: 4,
        master_seed: 0,
        concurrency: 1,
        retry: RetryPolicy {
            max_retries: 1,
            backoff_ms: 1,
        },
        strip_stem: false,
    };
    let err = generate_corpus(&config, &provider, None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
