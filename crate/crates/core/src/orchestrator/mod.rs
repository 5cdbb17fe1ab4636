//! Stage orchestration, out-of-sample validation and run manifests.
//!
//! Every stage reads its inputs from the files written by earlier stages and
//! records a digest for every file it writes. A rerun with the same
//! configuration reuses every leading stage whose artifacts are still intact
//! and recomputes from the first one that is not.

mod config;
mod manifest;
mod reports;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{derive_seed, PipelineConfig, RobustnessSection, SampleSection, ValidationSection};
pub use manifest::{pinned_timestamp, FailureKind, RunManifest, Stage, StageRecord, StageStatus, MANIFEST_FILE};
pub use reports::{
    consistency_csv, generalization_csv, metrics_csv, recommendation_md, render_reports, top_prompts_table,
    FamilyGeneralization, GeneralizationReport, GeneralizationSummary, ReportInputs, SideMetrics, SplitMetrics,
};

use crate::dataset::{
    build_in_sample, load_corpus, partition_k, read_corpus, CorpusFormat, CorpusSplit, DatasetError, LabeledCorpus,
};
use crate::digest::{canonical_json, pretty_json, sha256_hex, write_atomic};
use crate::inference::{
    execute_batch, records_from_jsonl, records_to_jsonl, Backend, BatchOptions, InferenceError, InferenceRecord,
};
use crate::metrics::{
    consistency, evaluate_split, predictions_by_prompt, ConsistencyReport, MetricsError, SliceKind, Slicing,
};
use crate::promptgen::{generate_catalog, validate_catalog, CatalogError, CatalogProfile, PromptCatalog};
use crate::selection::{rank_prompts, recommend, Recommendation};

pub const IN_SAMPLE: &str = "in_sample";
pub const OUT_OF_SAMPLE: &str = "out_of_sample";

pub mod paths {
    pub const SPLIT_IS: &str = "split/in_sample.jsonl";
    pub const SPLIT_OOS: &str = "split/out_of_sample.jsonl";
    pub const SPLIT_MANIFEST: &str = "split/split_manifest.json";
    pub const CATALOG: &str = "catalog.json";
    pub const RECORDS_IS: &str = "records/in_sample.jsonl";
    pub const RECORDS_OOS: &str = "records/out_of_sample.jsonl";
    pub const METRICS_IS: &str = "metrics/in_sample.json";
    pub const METRICS_OOS: &str = "metrics/out_of_sample.json";
    pub const CONSISTENCY: &str = "metrics/consistency.json";
    pub const RECOMMENDATION_JSON: &str = "recommendation.json";
    pub const RECOMMENDATION_MD: &str = "recommendation.md";
    pub const GENERALIZATION: &str = "reports/generalization.json";
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact {0} (run the earlier stages first)")]
    ArtifactMissing(String),
    #[error("corrupt artifact {path}: {message}")]
    BadArtifact { path: String, message: String },
    #[error("out-of-sample split is empty")]
    EmptyOos,
    #[error("prompt {0} is not in the catalog")]
    UnknownPrompt(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub fn failure_kind(&self) -> FailureKind {
        match self {
            PipelineError::Inference(InferenceError::BackendDown { .. }) => FailureKind::Backend,
            PipelineError::Dataset(_)
            | PipelineError::Catalog(_)
            | PipelineError::Metrics(_)
            | PipelineError::EmptyOos
            | PipelineError::UnknownPrompt(_)
            | PipelineError::ArtifactMissing(_)
            | PipelineError::BadArtifact { .. } => FailureKind::Data,
            _ => FailureKind::Internal,
        }
    }
}

/// `recommendation.json`: the recommendation plus a digest of the ranked inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationFile {
    #[serde(flatten)]
    pub recommendation: Recommendation,
    pub input_hash: String,
}

/// Output directory accessor that digests everything it writes.
struct Workspace {
    root: PathBuf,
}

impl Workspace {
    fn write(&self, artifacts: &mut BTreeMap<String, String>, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        write_atomic(&self.root.join(rel), bytes)?;
        artifacts.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn read(&self, rel: &str) -> Result<String, PipelineError> {
        std::fs::read_to_string(self.root.join(rel)).map_err(|_| PipelineError::ArtifactMissing(rel.to_string()))
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, rel: &str) -> Result<T, PipelineError> {
        serde_json::from_str(&self.read(rel)?).map_err(|e| PipelineError::BadArtifact {
            path: rel.to_string(),
            message: e.to_string(),
        })
    }

    fn read_corpus(&self, rel: &str) -> Result<LabeledCorpus, PipelineError> {
        Ok(read_corpus(self.read(rel)?.as_bytes(), CorpusFormat::Jsonl)?)
    }

    fn read_records(&self, rel: &str) -> Result<Vec<InferenceRecord>, PipelineError> {
        Ok(records_from_jsonl(&self.read(rel)?)?)
    }
}

fn seeds(cfg: &PipelineConfig) -> BTreeMap<String, u64> {
    let mut s = BTreeMap::new();
    s.insert("master".to_string(), cfg.seed);
    for name in ["sample", "partition", "inference", "oos_partition"] {
        s.insert(name.to_string(), cfg.stage_seed(name));
    }
    s
}

fn fresh_manifest(cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    let corpus_bytes = std::fs::read(cfg.corpus_file())
        .map_err(|e| PipelineError::Config(format!("cannot read corpus {}: {e}", cfg.corpus_file().display())))?;
    let mut inputs = BTreeMap::new();
    inputs.insert("corpus".to_string(), sha256_hex(&corpus_bytes));
    Ok(RunManifest::new(cfg.config_hash(), seeds(cfg), inputs))
}

/// Existing manifest if it belongs to this exact config and corpus.
fn matching_manifest(cfg: &PipelineConfig, fresh: &RunManifest) -> Option<RunManifest> {
    let old = RunManifest::load(&cfg.output_path())?;
    (old.config_hash == fresh.config_hash && old.inputs == fresh.inputs && old.stages.len() == fresh.stages.len())
        .then_some(old)
}

/// Runs stages 1→8, reusing intact leading stages from a previous run.
///
/// Config errors are returned before anything runs. A stage failure is
/// recorded in the returned manifest; later stages stay pending.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    let mut manifest = fresh_manifest(cfg)?;
    let out = cfg.output_path();
    let previous = matching_manifest(cfg, &manifest);
    let mut reusing = previous.is_some();
    for stage in Stage::ALL {
        if reusing {
            let prev = previous.as_ref().expect("reusing implies previous");
            if prev.stage_intact(stage, &out) {
                *manifest.stage_mut(stage) = prev.stage(stage).clone();
                continue;
            }
            reusing = false;
        }
        if !execute_stage(cfg, &mut manifest, stage)? {
            break;
        }
    }
    manifest.save(&out)?;
    Ok(manifest)
}

/// Runs one stage on top of the artifacts already on disk. Downstream stages
/// are reset to pending.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    let fresh = fresh_manifest(cfg)?;
    let out = cfg.output_path();
    let mut manifest = matching_manifest(cfg, &fresh).unwrap_or(fresh);
    for &earlier in &Stage::ALL[..stage.index()] {
        if !manifest.stage_intact(earlier, &out) {
            return Err(PipelineError::ArtifactMissing(format!(
                "outputs of stage {earlier} (required by {stage})"
            )));
        }
    }
    manifest.invalidate_from(stage);
    execute_stage(cfg, &mut manifest, stage)?;
    manifest.save(&out)?;
    Ok(manifest)
}

/// Returns Ok(false) when the stage failed and was recorded as such.
fn execute_stage(cfg: &PipelineConfig, manifest: &mut RunManifest, stage: Stage) -> Result<bool, PipelineError> {
    let ws = Workspace {
        root: cfg.output_path(),
    };
    let result = match stage {
        Stage::Sample => stage_sample(cfg, &ws),
        Stage::Catalog => stage_catalog(cfg, &ws),
        Stage::InferIs => stage_infer_is(cfg, &ws),
        Stage::Evaluate => stage_evaluate(cfg, &ws),
        Stage::Select => stage_select(cfg, &ws),
        Stage::InferOos => stage_infer_oos(cfg, &ws),
        Stage::Validate => stage_validate(cfg, &ws),
        Stage::Report => stage_report(manifest.config_hash.clone(), &ws),
    };
    let ok = result.is_ok();
    let rec = manifest.stage_mut(stage);
    match result {
        Ok(artifacts) => {
            rec.status = StageStatus::Done;
            rec.artifacts = artifacts;
            rec.completed_at = pinned_timestamp();
        }
        Err(e) => {
            rec.status = StageStatus::Failed;
            rec.failure = Some(e.failure_kind());
            rec.diagnostic = Some(e.to_string());
        }
    }
    manifest.save(&ws.root)?;
    Ok(ok)
}

type Artifacts = Result<BTreeMap<String, String>, PipelineError>;

fn stage_sample(cfg: &PipelineConfig, ws: &Workspace) -> Artifacts {
    let corpus = load_corpus(&cfg.corpus_file(), cfg.corpus_format())?;
    let plan = cfg.sample_plan();
    let split = build_in_sample(&corpus, &plan)?;
    let mut a = BTreeMap::new();
    ws.write(&mut a, paths::SPLIT_IS, split.in_sample.to_jsonl().as_bytes())?;
    ws.write(&mut a, paths::SPLIT_OOS, split.out_of_sample.to_jsonl().as_bytes())?;
    ws.write(
        &mut a,
        paths::SPLIT_MANIFEST,
        pretty_json(&split.summary(&plan)).as_bytes(),
    )?;
    Ok(a)
}

/// Built-in catalog, or the configured catalog file after validation.
pub fn load_catalog(cfg: &PipelineConfig) -> Result<PromptCatalog, PipelineError> {
    match &cfg.catalog.path {
        None => Ok(generate_catalog(&cfg.catalog)?),
        Some(p) => {
            let catalog = PromptCatalog::load(&cfg.resolve(p))?;
            let violations = validate_catalog(&catalog, &CatalogProfile::ANY);
            if !violations.is_empty() {
                let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
                return Err(PipelineError::BadArtifact {
                    path: p.clone(),
                    message: list.join("; "),
                });
            }
            Ok(catalog)
        }
    }
}

fn stage_catalog(cfg: &PipelineConfig, ws: &Workspace) -> Artifacts {
    let catalog = load_catalog(cfg)?;
    let mut a = BTreeMap::new();
    ws.write(&mut a, paths::CATALOG, catalog.to_json().as_bytes())?;
    Ok(a)
}

fn read_catalog(ws: &Workspace) -> Result<PromptCatalog, PipelineError> {
    PromptCatalog::from_json(&ws.read(paths::CATALOG)?).map_err(|e| PipelineError::BadArtifact {
        path: paths::CATALOG.to_string(),
        message: e.to_string(),
    })
}

fn build_backend(cfg: &PipelineConfig) -> Result<Box<dyn Backend>, PipelineError> {
    cfg.backend
        .build(cfg.mock_profile.as_ref(), cfg.stage_seed("inference"))
        .map_err(|e| PipelineError::Config(e.to_string()))
}

fn batch_options(cfg: &PipelineConfig, is_oos: bool) -> BatchOptions {
    BatchOptions::from_config(&cfg.backend, cfg.runs, cfg.stage_seed("inference"), is_oos)
}

fn stage_infer_is(cfg: &PipelineConfig, ws: &Workspace) -> Artifacts {
    let corpus = ws.read_corpus(paths::SPLIT_IS)?;
    let catalog = read_catalog(ws)?;
    let backend = build_backend(cfg)?;
    let records = execute_batch(&catalog, &corpus, backend.as_ref(), &batch_options(cfg, false))?;
    let mut a = BTreeMap::new();
    ws.write(&mut a, paths::RECORDS_IS, records_to_jsonl(&records).as_bytes())?;
    Ok(a)
}

fn slicing_for(cfg: &PipelineConfig, corpus: &LabeledCorpus, seed_name: &str) -> Result<Slicing, PipelineError> {
    Ok(match cfg.robustness.slice_kind {
        SliceKind::Partition => Slicing::Partitions(partition_k(corpus, cfg.robustness.k, cfg.stage_seed(seed_name))?),
        SliceKind::RepeatedRun => Slicing::RepeatedRuns,
    })
}

/// Metrics for one split's records.
pub fn evaluate_records(
    records: &[InferenceRecord],
    corpus: &LabeledCorpus,
    slicing: &Slicing,
    split: &str,
) -> Result<SplitMetrics, PipelineError> {
    Ok(SplitMetrics {
        split: split.to_string(),
        slice_kind: slicing.kind(),
        evaluations: evaluate_split(records, &corpus.gold(), slicing, split)?,
    })
}

fn stage_evaluate(cfg: &PipelineConfig, ws: &Workspace) -> Artifacts {
    let corpus = ws.read_corpus(paths::SPLIT_IS)?;
    let records = ws.read_records(paths::RECORDS_IS)?;
    let slicing = slicing_for(cfg, &corpus, "partition")?;
    let metrics = evaluate_records(&records, &corpus, &slicing, IN_SAMPLE)?;
    let consistency = consistency(&predictions_by_prompt(&records))?;
    let mut a = BTreeMap::new();
    ws.write(&mut a, paths::METRICS_IS, pretty_json(&metrics).as_bytes())?;
    ws.write(&mut a, paths::CONSISTENCY, pretty_json(&consistency).as_bytes())?;
    Ok(a)
}

/// Ranks and recommends from in-sample metrics.
pub fn select_prompt(metrics: &SplitMetrics, cfg: &PipelineConfig) -> Result<RecommendationFile, PipelineError> {
    let rows = metrics.rows();
    let ranked = rank_prompts(&rows, &cfg.criteria)?;
    let recommendation = recommend(&ranked, &cfg.criteria, cfg.validation.top_k)?;
    Ok(RecommendationFile {
        recommendation,
        input_hash: sha256_hex(canonical_json(&rows).as_bytes()),
    })
}

fn stage_select(cfg: &PipelineConfig, ws: &Workspace) -> Artifacts {
    let metrics: SplitMetrics = ws.read_json(paths::METRICS_IS)?;
    let file = select_prompt(&metrics, cfg)?;
    let mut a = BTreeMap::new();
    ws.write(&mut a, paths::RECOMMENDATION_JSON, pretty_json(&file).as_bytes())?;
    ws.write(
        &mut a,
        paths::RECOMMENDATION_MD,
        recommendation_md(&file.recommendation).as_bytes(),
    )?;
    Ok(a)
}

/// The prompts to run out-of-sample: the chosen one, or the whole catalog.
pub fn oos_catalog(
    rec: &Recommendation,
    catalog: &PromptCatalog,
    all_prompts: bool,
) -> Result<PromptCatalog, PipelineError> {
    let chosen = &rec.chosen.prompt_id;
    let variant = catalog
        .get(chosen)
        .ok_or_else(|| PipelineError::UnknownPrompt(chosen.clone()))?;
    Ok(if all_prompts {
        catalog.clone()
    } else {
        PromptCatalog::from_variants(vec![variant.clone()])
    })
}

fn stage_infer_oos(cfg: &PipelineConfig, ws: &Workspace) -> Artifacts {
    let corpus = ws.read_corpus(paths::SPLIT_OOS)?;
    if corpus.is_empty() {
        return Err(PipelineError::EmptyOos);
    }
    let rec: RecommendationFile = ws.read_json(paths::RECOMMENDATION_JSON)?;
    let catalog = oos_catalog(&rec.recommendation, &read_catalog(ws)?, cfg.validation.all_prompts)?;
    let backend = build_backend(cfg)?;
    let records = execute_batch(&catalog, &corpus, backend.as_ref(), &batch_options(cfg, true))?;
    let mut a = BTreeMap::new();
    ws.write(&mut a, paths::RECORDS_OOS, records_to_jsonl(&records).as_bytes())?;
    Ok(a)
}

fn stage_validate(cfg: &PipelineConfig, ws: &Workspace) -> Artifacts {
    let corpus = ws.read_corpus(paths::SPLIT_OOS)?;
    if corpus.is_empty() {
        return Err(PipelineError::EmptyOos);
    }
    let records = ws.read_records(paths::RECORDS_OOS)?;
    let is_metrics: SplitMetrics = ws.read_json(paths::METRICS_IS)?;
    let rec: RecommendationFile = ws.read_json(paths::RECOMMENDATION_JSON)?;
    let slicing = slicing_for(cfg, &corpus, "oos_partition")?;
    let oos_metrics = evaluate_records(&records, &corpus, &slicing, OUT_OF_SAMPLE)?;
    let chosen = &rec.recommendation.chosen.prompt_id;
    let summary = GeneralizationSummary::compute(chosen, &is_metrics, &oos_metrics)
        .ok_or_else(|| PipelineError::UnknownPrompt(chosen.clone()))?;
    let mut a = BTreeMap::new();
    ws.write(&mut a, paths::METRICS_OOS, pretty_json(&oos_metrics).as_bytes())?;
    ws.write(&mut a, paths::GENERALIZATION, pretty_json(&summary).as_bytes())?;
    Ok(a)
}

fn stage_report(config_hash: String, ws: &Workspace) -> Artifacts {
    let files = emit_reports(&ws.root, &config_hash)?;
    let mut a = BTreeMap::new();
    for (rel, body) in files {
        ws.write(&mut a, &rel, body.as_bytes())?;
    }
    Ok(a)
}

/// Loads the stage artifacts under `out_dir` and renders the report files
/// (without writing them).
pub fn emit_reports(out_dir: &Path, config_hash: &str) -> Result<BTreeMap<String, String>, PipelineError> {
    let ws = Workspace {
        root: out_dir.to_path_buf(),
    };
    let in_sample: SplitMetrics = ws.read_json(paths::METRICS_IS)?;
    let out_of_sample: SplitMetrics = ws.read_json(paths::METRICS_OOS)?;
    let consistency: ConsistencyReport = ws.read_json(paths::CONSISTENCY)?;
    let rec: RecommendationFile = ws.read_json(paths::RECOMMENDATION_JSON)?;
    let generalization: GeneralizationSummary = ws.read_json(paths::GENERALIZATION)?;
    Ok(render_reports(&ReportInputs {
        config_hash,
        in_sample: &in_sample,
        out_of_sample: &out_of_sample,
        consistency: &consistency,
        recommendation: &rec.recommendation,
        generalization: &generalization,
    }))
}

/// Everything out-of-sample validation produces.
#[derive(Debug, Clone)]
pub struct OosValidation {
    pub records: Vec<InferenceRecord>,
    pub metrics: SplitMetrics,
    pub summary: GeneralizationSummary,
}

/// Runs the recommended prompt (or all prompts) on the out-of-sample split
/// and compares against its in-sample metrics.
#[allow(clippy::too_many_arguments)]
pub fn validate_oos(
    recommendation: &Recommendation,
    in_sample: &SplitMetrics,
    catalog: &PromptCatalog,
    split: &CorpusSplit,
    backend: &dyn Backend,
    opts: &BatchOptions,
    slicing: &Slicing,
    all_prompts: bool,
) -> Result<OosValidation, PipelineError> {
    if split.out_of_sample.is_empty() {
        return Err(PipelineError::EmptyOos);
    }
    let catalog = oos_catalog(recommendation, catalog, all_prompts)?;
    let opts = BatchOptions { is_oos: true, ..*opts };
    let records = execute_batch(&catalog, &split.out_of_sample, backend, &opts)?;
    let metrics = evaluate_records(&records, &split.out_of_sample, slicing, OUT_OF_SAMPLE)?;
    let chosen = &recommendation.chosen.prompt_id;
    let summary = GeneralizationSummary::compute(chosen, in_sample, &metrics)
        .ok_or_else(|| PipelineError::UnknownPrompt(chosen.clone()))?;
    Ok(OosValidation {
        records,
        metrics,
        summary,
    })
}

/// Ids present in a corpus, for quick membership checks.
pub fn id_set(corpus: &LabeledCorpus) -> BTreeSet<String> {
    corpus.ids().map(str::to_string).collect()
}
