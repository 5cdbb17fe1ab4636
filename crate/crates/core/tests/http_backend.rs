//! The HTTP client against a local stub server speaking just enough HTTP/1.1.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use promptscope::dataset::{GoldLabel, LabeledCorpus, LabeledRecord, Transcript};
use promptscope::inference::{execute_batch, BatchOptions, HttpBackend, Prediction};
use promptscope::promptgen::{generate_catalog, CatalogConfig, PromptCatalog};

struct Stub {
    url: String,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<(String, serde_json::Value)>>>,
}

/// Answers the first `failures` requests with `fail_status`, then succeeds.
fn spawn_stub(failures: usize, fail_status: u16) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let (h, b) = (hits.clone(), bodies.clone());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line["authorization:".len()..].trim().to_string();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            b.lock().unwrap().push((auth, serde_json::from_slice(&body).unwrap()));
            let n = h.fetch_add(1, Ordering::SeqCst);
            let (status, payload) = if n < failures {
                (fail_status, "{}".to_string())
            } else {
                (
                    200,
                    r#"{"choices":[{"message":{"role":"assistant","content":"LABEL: DEPRESSED"},"finish_reason":"stop"}]}"#
                        .to_string(),
                )
            };
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    Stub { url, hits, bodies }
}

fn one_prompt() -> PromptCatalog {
    let all = generate_catalog(&CatalogConfig::default()).unwrap();
    PromptCatalog::from_variants(vec![all.variants[0].clone()])
}

fn one_record() -> LabeledCorpus {
    LabeledCorpus::new(vec![LabeledRecord {
        transcript: Transcript::new("T1", "Participant: I feel tired all the time.").unwrap(),
        label: GoldLabel::Positive,
    }])
    .unwrap()
}

fn opts(max_retries: u32) -> BatchOptions {
    BatchOptions {
        runs: 1,
        parallelism: 1,
        max_retries,
        backoff_base: Duration::from_millis(5),
        seed: 1,
        is_oos: false,
    }
}

fn backend(url: &str) -> HttpBackend {
    HttpBackend::new(
        url,
        "stub-model",
        0.0,
        64,
        Duration::from_secs(5),
        Some("sekrit".into()),
    )
}

#[test]
fn retries_transient_errors_then_succeeds() {
    let stub = spawn_stub(2, 503);
    let records = execute_batch(&one_prompt(), &one_record(), &backend(&stub.url), &opts(2)).unwrap();
    assert_eq!(stub.hits.load(Ordering::SeqCst), 3);
    let r = &records[0];
    assert_eq!(r.parsed, Prediction::Positive);
    assert_eq!(r.backend_meta["retry_count"], "2");
    assert_eq!(r.backend_meta["attempts"], "3");
    assert_eq!(r.backend_meta["finish_reason"], "stop");
    assert_eq!(r.backend_meta["model_id"], "stub-model");
    assert!(!r.is_failure());
}

#[test]
fn sends_chat_completions_body_with_bearer_token() {
    let stub = spawn_stub(0, 503);
    execute_batch(&one_prompt(), &one_record(), &backend(&stub.url), &opts(0)).unwrap();
    let bodies = stub.bodies.lock().unwrap();
    let (auth, body) = &bodies[0];
    assert_eq!(auth, "Bearer sekrit");
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["role"], "user");
    assert!(body["messages"][0]["content"]
        .as_str()
        .unwrap()
        .contains("I feel tired all the time."));
}

#[test]
fn exhausted_retries_report_backend_down() {
    let stub = spawn_stub(usize::MAX, 429);
    let err = execute_batch(&one_prompt(), &one_record(), &backend(&stub.url), &opts(1)).unwrap_err();
    assert!(err.to_string().contains("HTTP 429"), "{err}");
    assert_eq!(stub.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let stub = spawn_stub(usize::MAX, 400);
    let err = execute_batch(&one_prompt(), &one_record(), &backend(&stub.url), &opts(3)).unwrap_err();
    assert!(err.to_string().contains("HTTP 400"), "{err}");
    assert_eq!(stub.hits.load(Ordering::SeqCst), 1);
}
