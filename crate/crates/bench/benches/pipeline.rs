use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use promptscope::dataset::{build_in_sample, partition_k, SamplePlan};
use promptscope::inference::{execute_batch, BatchOptions, MockBackend, MockProfile};
use promptscope::metrics::{consistency, evaluate_split, predictions_by_prompt, Slicing};
use promptscope::orchestrator::{run_pipeline, PipelineConfig};
use promptscope::promptgen::{generate_catalog, CatalogConfig};
use promptscope::synth::synthetic_corpus;

fn opts(parallelism: usize) -> BatchOptions {
    BatchOptions {
        runs: 1,
        parallelism,
        max_retries: 0,
        backoff_base: std::time::Duration::ZERO,
        seed: 1,
        is_oos: false,
    }
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_in_sample");
    for n in [250, 1000] {
        let corpus = synthetic_corpus(n, 0.5, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &corpus, |b, corpus| {
            b.iter(|| build_in_sample(black_box(corpus), &SamplePlan::default()).unwrap())
        });
    }
    group.finish();
}

fn inference(c: &mut Criterion) {
    let corpus = synthetic_corpus(200, 0.5, 1).unwrap();
    let catalog = generate_catalog(&CatalogConfig::default()).unwrap();
    let backend = MockBackend::new(MockProfile::reference(), 7, "mock-v1");
    let mut group = c.benchmark_group("mock_batch_28x200");
    for p in [1, 4] {
        group.bench_with_input(BenchmarkId::new("parallelism", p), &p, |b, &p| {
            b.iter(|| execute_batch(&catalog, &corpus, &backend, &opts(p)).unwrap())
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let corpus = synthetic_corpus(200, 0.5, 1).unwrap();
    let catalog = generate_catalog(&CatalogConfig::default()).unwrap();
    let backend = MockBackend::new(MockProfile::reference(), 7, "mock-v1");
    let records = execute_batch(&catalog, &corpus, &backend, &opts(4)).unwrap();
    let slicing = Slicing::Partitions(partition_k(&corpus, 3, 1).unwrap());
    let gold = corpus.gold();
    c.bench_function("evaluate_split_28x200", |b| {
        b.iter(|| evaluate_split(black_box(&records), &gold, &slicing, "in_sample").unwrap())
    });
    c.bench_function("consistency_28x200", |b| {
        b.iter(|| consistency(&predictions_by_prompt(black_box(&records))).unwrap())
    });
}

fn full_pipeline(c: &mut Criterion) {
    let dir = std::env::temp_dir().join(format!("promptscope-bench-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let corpus_path = dir.join("corpus.jsonl");
    std::fs::write(&corpus_path, synthetic_corpus(250, 0.5, 1).unwrap().to_jsonl()).unwrap();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("fresh_run_250", |b| {
        let mut i = 0u64;
        b.iter(|| {
            i += 1;
            let out = dir.join(format!("out{i}"));
            let cfg = PipelineConfig::new_mock(corpus_path.to_string_lossy(), out.to_string_lossy(), 3);
            let m = run_pipeline(&cfg).unwrap();
            std::fs::remove_dir_all(&out).unwrap();
            m
        })
    });
    group.finish();
    std::fs::remove_dir_all(&dir).ok();
}

criterion_group!(benches, sampling, inference, evaluation, full_pipeline);
criterion_main!(benches);
