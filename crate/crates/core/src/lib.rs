//! Design, execution, evaluation, ranking and validation of prompt
//! strategies for binary transcript classification.
//!
//! The crate is organised by pipeline role:
//!
//! * [`dataset`] loads labeled corpora, builds the balanced in-sample subset
//!   and stratified partitions.
//! * [`promptgen`] holds the seven strategy families and the prompt catalog.
//! * [`inference`] runs prompts against a mock or OpenAI-compatible backend.
//! * [`metrics`] computes predictive and behavioral metrics.
//! * [`selection`] ranks prompts and produces a recommendation.
//! * [`orchestrator`] wires the stages together with reproducible manifests.

pub mod dataset;
pub mod digest;
pub mod inference;
pub mod metrics;
pub mod orchestrator;
pub mod promptgen;
pub mod selection;
pub mod synth;

pub use dataset::{GoldLabel, LabeledCorpus, LabeledRecord, Transcript};
pub use inference::{BackendConfig, InferenceRecord, MockProfile, Prediction};
pub use metrics::{ConfusionCounts, MetricSet};
pub use orchestrator::{run_pipeline, PipelineConfig, PipelineError, RunManifest, Stage};
pub use promptgen::{PromptCatalog, PromptVariant, StrategyFamily};
pub use selection::{Recommendation, SelectionCriteria};
