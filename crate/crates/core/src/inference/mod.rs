//! Batch execution of every prompt × transcript × run triple against a
//! completion backend.
//!
//! Requests run on up to `parallelism` worker threads. Results are keyed by
//! (prompt_id, transcript_id, run_index) and sorted before they are returned,
//! so the output never depends on completion order.

mod http;
mod mock;
mod parse;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::HttpBackend;
pub use mock::{mock_complete, MockBackend, MockProfile};
pub use parse::{canonical_label_line, parse_label, Prediction};

use crate::dataset::{GoldLabel, LabeledCorpus};
use crate::digest::{stable_u64, unit_f64};
use crate::promptgen::{render_prompt, CatalogError, PromptCatalog};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("catalog or corpus is empty")]
    EmptyInput,
    #[error("all {attempted} requests failed; last error: {last_error}")]
    BackendDown { attempted: usize, last_error: String },
    #[error("mock profile has no accuracy for family {0}")]
    ProfileIncomplete(String),
    #[error("backend config: {0}")]
    Config(String),
    #[error(transparent)]
    Template(#[from] CatalogError),
    #[error("records file line {line}: {source}")]
    Records { line: usize, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Full chat-completions URL (http only).
    pub endpoint_url: Option<String>,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub parallelism: usize,
    /// Derived from the master seed when absent.
    pub seed: Option<u64>,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub backoff_base_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint_url: None,
            model_id: "mock-v1".into(),
            temperature: 0.0,
            max_output_tokens: 256,
            timeout_ms: 30_000,
            max_retries: 2,
            parallelism: 4,
            seed: None,
            api_key_env: None,
            backoff_base_ms: 500,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self, profile: Option<&MockProfile>) -> Result<(), InferenceError> {
        let bad = |m: &str| Err(InferenceError::Config(m.to_string()));
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature must be >= 0");
        }
        if self.max_output_tokens == 0 || self.timeout_ms == 0 || self.parallelism == 0 {
            return bad("max_output_tokens, timeout_ms and parallelism must be positive");
        }
        match self.kind {
            BackendKind::Http => {
                if self.endpoint_url.as_deref().is_none_or(str::is_empty) {
                    return bad("http backend requires endpoint_url");
                }
                if self.model_id.is_empty() {
                    return bad("http backend requires model_id");
                }
            }
            BackendKind::Mock => {
                let Some(profile) = profile else {
                    return bad("mock backend requires a mock_profile");
                };
                profile.validate().map_err(InferenceError::Config)?;
            }
        }
        Ok(())
    }

    /// Builds the backend. A missing seed falls back to `default_seed`.
    pub fn build(&self, profile: Option<&MockProfile>, default_seed: u64) -> Result<Box<dyn Backend>, InferenceError> {
        self.validate(profile)?;
        Ok(match self.kind {
            BackendKind::Mock => Box::new(MockBackend::new(
                profile.cloned().expect("validated"),
                self.seed.unwrap_or(default_seed),
                self.model_id.clone(),
            )),
            BackendKind::Http => {
                let token = self.api_key_env.as_deref().and_then(|var| std::env::var(var).ok());
                Box::new(HttpBackend::new(
                    self.endpoint_url.clone().expect("validated"),
                    self.model_id.clone(),
                    self.temperature,
                    self.max_output_tokens,
                    Duration::from_millis(self.timeout_ms),
                    token,
                ))
            }
        })
    }
}

pub struct CompletionRequest<'a> {
    pub prompt_id: &'a str,
    pub transcript_id: &'a str,
    pub run_index: u32,
    pub prompt: &'a str,
    /// Only the mock backend looks at these two.
    pub gold: GoldLabel,
    pub is_oos: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub finish_reason: String,
    /// Reported by synthetic backends instead of wall-clock time.
    pub simulated_latency_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// Worth retrying: connection failures, timeouts, 429, 5xx.
    Transient(String),
    Fatal(String),
}

impl BackendError {
    fn message(&self) -> &str {
        match self {
            BackendError::Transient(m) | BackendError::Fatal(m) => m,
        }
    }
}

pub trait Backend: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRecord {
    pub prompt_id: String,
    pub transcript_id: String,
    pub run_index: u32,
    pub raw_output: String,
    pub parsed: Prediction,
    pub latency_ms: f64,
    pub backend_meta: BTreeMap<String, String>,
}

impl InferenceRecord {
    pub fn is_failure(&self) -> bool {
        self.backend_meta.contains_key("error")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchOptions {
    pub runs: u32,
    pub parallelism: usize,
    pub max_retries: u32,
    pub backoff_base: Duration,
    /// Seeds retry jitter.
    pub seed: u64,
    pub is_oos: bool,
}

impl BatchOptions {
    pub fn from_config(cfg: &BackendConfig, runs: u32, seed: u64, is_oos: bool) -> BatchOptions {
        BatchOptions {
            runs,
            parallelism: cfg.parallelism,
            max_retries: cfg.max_retries,
            backoff_base: Duration::from_millis(cfg.backoff_base_ms),
            seed: cfg.seed.unwrap_or(seed),
            is_oos,
        }
    }
}

struct Job<'a> {
    prompt_id: &'a str,
    transcript_id: &'a str,
    run_index: u32,
    prompt: String,
    gold: GoldLabel,
}

pub fn execute_batch(
    catalog: &PromptCatalog,
    corpus: &LabeledCorpus,
    backend: &dyn Backend,
    opts: &BatchOptions,
) -> Result<Vec<InferenceRecord>, InferenceError> {
    if catalog.is_empty() || corpus.is_empty() || opts.runs == 0 {
        return Err(InferenceError::EmptyInput);
    }
    let mut jobs = Vec::with_capacity(catalog.len() * corpus.len() * opts.runs as usize);
    for variant in &catalog.variants {
        for rec in corpus.records() {
            let prompt = render_prompt(variant, &rec.transcript)?;
            for run_index in 0..opts.runs {
                jobs.push(Job {
                    prompt_id: &variant.id,
                    transcript_id: rec.id(),
                    run_index,
                    prompt: prompt.clone(),
                    gold: rec.label,
                });
            }
        }
    }

    let next = AtomicUsize::new(0);
    let workers = opts.parallelism.clamp(1, jobs.len());
    let mut records: Vec<InferenceRecord> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut local = Vec::new();
                    while let Some(job) = jobs.get(next.fetch_add(1, Ordering::Relaxed)) {
                        local.push(run_job(job, backend, opts));
                    }
                    local
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("inference worker panicked"))
            .collect()
    });
    records.sort_by(|a, b| {
        (a.prompt_id.as_str(), a.transcript_id.as_str(), a.run_index).cmp(&(
            b.prompt_id.as_str(),
            b.transcript_id.as_str(),
            b.run_index,
        ))
    });
    if records.iter().all(InferenceRecord::is_failure) {
        let last_error = records
            .last()
            .and_then(|r| r.backend_meta.get("error").cloned())
            .unwrap_or_default();
        return Err(InferenceError::BackendDown {
            attempted: records.len(),
            last_error,
        });
    }
    Ok(records)
}

fn backoff_delay(opts: &BatchOptions, job: &Job<'_>, attempt: u32) -> Duration {
    let base = opts.backoff_base.saturating_mul(1u32 << attempt.min(16));
    let jitter = unit_f64(stable_u64(&[
        b"backoff",
        &opts.seed.to_le_bytes(),
        job.prompt_id.as_bytes(),
        job.transcript_id.as_bytes(),
        &job.run_index.to_le_bytes(),
        &attempt.to_le_bytes(),
    ]));
    base + base.mul_f64(0.25 * jitter)
}

fn run_job(job: &Job<'_>, backend: &dyn Backend, opts: &BatchOptions) -> InferenceRecord {
    let req = CompletionRequest {
        prompt_id: job.prompt_id,
        transcript_id: job.transcript_id,
        run_index: job.run_index,
        prompt: &job.prompt,
        gold: job.gold,
        is_oos: opts.is_oos,
    };
    let mut meta = BTreeMap::new();
    meta.insert("model_id".to_string(), backend.model_id().to_string());
    let mut network = Duration::ZERO;
    let mut attempts = 0u32;
    let outcome = loop {
        attempts += 1;
        let started = Instant::now();
        let result = backend.complete(&req);
        network += started.elapsed();
        match result {
            Err(BackendError::Transient(_)) if attempts <= opts.max_retries => {
                std::thread::sleep(backoff_delay(opts, job, attempts - 1));
            }
            other => break other,
        }
    };
    meta.insert("attempts".to_string(), attempts.to_string());
    meta.insert("retry_count".to_string(), (attempts - 1).to_string());

    let (raw_output, parsed, latency_ms) = match outcome {
        Ok(c) => {
            meta.insert("finish_reason".to_string(), c.finish_reason);
            let latency = c.simulated_latency_ms.unwrap_or(network.as_secs_f64() * 1000.0);
            let parsed = parse_label(&c.text);
            (c.text, parsed, latency)
        }
        Err(e) => {
            meta.insert("finish_reason".to_string(), "error".to_string());
            meta.insert("error".to_string(), e.message().to_string());
            (String::new(), Prediction::Invalid, network.as_secs_f64() * 1000.0)
        }
    };
    InferenceRecord {
        prompt_id: job.prompt_id.to_string(),
        transcript_id: job.transcript_id.to_string(),
        run_index: job.run_index,
        raw_output,
        parsed,
        latency_ms,
        backend_meta: meta,
    }
}

/// records.jsonl body: one record per line.
pub fn records_to_jsonl(records: &[InferenceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn records_from_jsonl(text: &str) -> Result<Vec<InferenceRecord>, InferenceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| InferenceError::Records { line: i + 1, source }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{read_corpus, CorpusFormat};
    use crate::promptgen::{generate_catalog, CatalogConfig};

    fn corpus3() -> LabeledCorpus {
        let data = r#"{"id":"t2","text":"tired all the time","label":"positive"}
{"id":"t1","text":"doing great","label":"negative"}
{"id":"t3","text":"can't sleep","label":"positive"}
"#;
        read_corpus(data.as_bytes(), CorpusFormat::Jsonl).unwrap()
    }

    fn opts(parallelism: usize) -> BatchOptions {
        BatchOptions {
            runs: 1,
            parallelism,
            max_retries: 2,
            backoff_base: Duration::from_millis(1),
            seed: 5,
            is_oos: false,
        }
    }

    #[test]
    fn cardinality_and_order() {
        let catalog = generate_catalog(&CatalogConfig {
            families: vec!["RP".into(), "DI".into()],
            indices: vec![1],
            ..Default::default()
        })
        .unwrap();
        assert_eq!(catalog.len(), 2);
        let backend = MockBackend::new(MockProfile::reference(), 3, "mock");
        let recs = execute_batch(&catalog, &corpus3(), &backend, &opts(3)).unwrap();
        let keys: Vec<_> = recs
            .iter()
            .map(|r| format!("{}/{}", r.prompt_id, r.transcript_id))
            .collect();
        assert_eq!(keys, ["DI-1/t1", "DI-1/t2", "DI-1/t3", "RP-1/t1", "RP-1/t2", "RP-1/t3"]);
        assert!(recs.iter().all(|r| r.parsed != Prediction::Invalid));
    }

    #[test]
    fn mock_is_deterministic_across_parallelism() {
        let catalog = generate_catalog(&CatalogConfig::default()).unwrap();
        let backend = MockBackend::new(MockProfile::reference(), 3, "mock");
        let a = execute_batch(&catalog, &corpus3(), &backend, &opts(1)).unwrap();
        let b = execute_batch(&catalog, &corpus3(), &backend, &opts(8)).unwrap();
        assert_eq!(records_to_jsonl(&a), records_to_jsonl(&b));
        assert_eq!(records_from_jsonl(&records_to_jsonl(&a)).unwrap(), a);
    }

    struct Down;
    impl Backend for Down {
        fn model_id(&self) -> &str {
            "down"
        }
        fn complete(&self, _: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
            Err(BackendError::Transient("connection refused".into()))
        }
    }

    #[test]
    fn all_failures_is_backend_down() {
        let catalog = generate_catalog(&CatalogConfig {
            families: vec!["DI".into()],
            indices: vec![1],
            ..Default::default()
        })
        .unwrap();
        let err = execute_batch(&catalog, &corpus3(), &Down, &opts(2)).unwrap_err();
        assert!(matches!(err, InferenceError::BackendDown { attempted: 3, .. }));
    }

    #[test]
    fn empty_input_rejected() {
        let catalog = generate_catalog(&CatalogConfig::default()).unwrap();
        let backend = MockBackend::new(MockProfile::reference(), 3, "mock");
        let empty = LabeledCorpus::default();
        assert!(matches!(
            execute_batch(&catalog, &empty, &backend, &opts(1)),
            Err(InferenceError::EmptyInput)
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = BackendConfig::default();
        assert!(cfg.validate(None).is_err());
        assert!(cfg.validate(Some(&MockProfile::reference())).is_ok());
        cfg.kind = BackendKind::Http;
        assert!(cfg.validate(None).is_err());
        cfg.endpoint_url = Some("http://127.0.0.1:1/v1/chat/completions".into());
        assert!(cfg.validate(None).is_ok());
    }
}
