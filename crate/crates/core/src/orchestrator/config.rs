use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{CorpusFormat, SamplePlan};
use crate::digest::{canonical_json, sha256_hex, stable_u64};
use crate::inference::{BackendConfig, BackendKind, MockProfile};
use crate::metrics::SliceKind;
use crate::promptgen::CatalogConfig;
use crate::selection::SelectionCriteria;

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub in_sample_fraction: f64,
    pub diversity_weight: f64,
}

impl Default for SampleSection {
    fn default() -> Self {
        let plan = SamplePlan::default();
        SampleSection {
            in_sample_fraction: plan.in_sample_fraction,
            diversity_weight: plan.diversity_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessSection {
    /// Partition count when `slice_kind = "partition"`.
    pub k: usize,
    pub slice_kind: SliceKind,
}

impl Default for RobustnessSection {
    fn default() -> Self {
        RobustnessSection {
            k: 3,
            slice_kind: SliceKind::Partition,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSection {
    /// Run every catalog prompt out-of-sample, not just the chosen one.
    pub all_prompts: bool,
    /// Size of the recommendation list (chosen + runners-up).
    pub top_k: usize,
}

impl Default for ValidationSection {
    fn default() -> Self {
        ValidationSection {
            all_prompts: false,
            top_k: 5,
        }
    }
}

/// Full pipeline configuration, read from a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_path: String,
    #[serde(default)]
    pub corpus_format: Option<CorpusFormat>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    /// Master seed; per-stage seeds are derived from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub catalog: CatalogConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub mock_profile: Option<MockProfile>,
    #[serde(default)]
    pub robustness: RobustnessSection,
    #[serde(default)]
    pub criteria: SelectionCriteria,
    #[serde(default)]
    pub validation: ValidationSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> String {
    "out".into()
}

fn default_runs() -> u32 {
    1
}

impl PipelineConfig {
    /// Mock backend with the reference profile and defaults everywhere else.
    pub fn new_mock(corpus_path: impl Into<String>, output_dir: impl Into<String>, seed: u64) -> PipelineConfig {
        PipelineConfig {
            corpus_path: corpus_path.into(),
            corpus_format: None,
            output_dir: output_dir.into(),
            seed,
            runs: 1,
            sample: SampleSection::default(),
            catalog: CatalogConfig::default(),
            backend: BackendConfig::default(),
            mock_profile: Some(MockProfile::reference()),
            robustness: RobustnessSection::default(),
            criteria: SelectionCriteria::default(),
            validation: ValidationSection::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<PipelineConfig, PipelineError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        PipelineConfig::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn corpus_file(&self) -> PathBuf {
        self.resolve(&self.corpus_path)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn corpus_format(&self) -> CorpusFormat {
        self.corpus_format
            .unwrap_or_else(|| CorpusFormat::from_path(Path::new(&self.corpus_path)))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.corpus_path.is_empty() {
            return bad("corpus_path is empty".into());
        }
        if self.runs == 0 {
            return bad("runs must be positive".into());
        }
        let f = self.sample.in_sample_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return bad(format!("sample.in_sample_fraction must be in (0, 1], got {f}"));
        }
        if !(0.0..=1.0).contains(&self.sample.diversity_weight) {
            return bad("sample.diversity_weight must be in [0, 1]".into());
        }
        match self.robustness.slice_kind {
            SliceKind::Partition if self.robustness.k < 2 => {
                return bad("robustness.k must be at least 2".into());
            }
            SliceKind::RepeatedRun if self.runs < 2 => {
                return bad("robustness.slice_kind = \"repeated_run\" needs runs >= 2".into());
            }
            SliceKind::RepeatedRun if self.backend.kind == BackendKind::Http && self.backend.temperature == 0.0 => {
                return bad("repeated_run slicing against a live backend needs temperature > 0".into());
            }
            _ => {}
        }
        if self.validation.top_k == 0 {
            return bad("validation.top_k must be positive".into());
        }
        self.criteria.validate().map_err(PipelineError::Config)?;
        self.backend
            .validate(self.mock_profile.as_ref())
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        crate::promptgen::generate_catalog(&self.catalog).map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// Canonical bytes that define "the same configuration". Output location
    /// and request parallelism do not change results and are left out.
    pub fn canonical_bytes(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
            if let Some(backend) = obj.get_mut("backend").and_then(|b| b.as_object_mut()) {
                backend.remove("parallelism");
            }
        }
        canonical_json(&v)
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(self.canonical_bytes().as_bytes())
    }

    pub fn stage_seed(&self, name: &str) -> u64 {
        derive_seed(self.seed, name)
    }

    pub fn sample_plan(&self) -> SamplePlan {
        SamplePlan {
            in_sample_fraction: self.sample.in_sample_fraction,
            seed: self.stage_seed("sample"),
            diversity_weight: self.sample.diversity_weight,
        }
    }
}

/// Stable per-stage seed from the master seed.
pub fn derive_seed(master: u64, stage: &str) -> u64 {
    stable_u64(&[b"seed", &master.to_le_bytes(), stage.as_bytes()])
}
