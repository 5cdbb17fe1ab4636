use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::digest::{pretty_json, sha256_hex, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Sample,
    Catalog,
    InferIs,
    Evaluate,
    Select,
    InferOos,
    Validate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Sample,
        Stage::Catalog,
        Stage::InferIs,
        Stage::Evaluate,
        Stage::Select,
        Stage::InferOos,
        Stage::Validate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Sample => "sample",
            Stage::Catalog => "catalog",
            Stage::InferIs => "infer_is",
            Stage::Evaluate => "evaluate",
            Stage::Select => "select",
            Stage::InferOos => "infer_oos",
            Stage::Validate => "validate",
            Stage::Report => "report",
        }
    }

    pub fn index(self) -> usize {
        Stage::ALL.iter().position(|&s| s == self).expect("listed")
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureKind {
    Backend,
    Data,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    /// Output-relative path → content digest.
    pub artifacts: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    /// Seconds since the Unix epoch, only when `SOURCE_DATE_EPOCH` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed_at: Option<u64>,
}

impl StageRecord {
    pub fn pending(stage: Stage) -> StageRecord {
        StageRecord {
            stage,
            status: StageStatus::Pending,
            artifacts: BTreeMap::new(),
            failure: None,
            diagnostic: None,
            completed_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    /// Digests of inputs read from outside the output directory.
    pub inputs: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn new(config_hash: String, seeds: BTreeMap<String, u64>, inputs: BTreeMap<String, String>) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            seeds,
            inputs,
            stages: Stage::ALL.iter().map(|&s| StageRecord::pending(s)).collect(),
        }
    }

    pub fn stage(&self, stage: Stage) -> &StageRecord {
        &self.stages[stage.index()]
    }

    pub fn stage_mut(&mut self, stage: Stage) -> &mut StageRecord {
        &mut self.stages[stage.index()]
    }

    pub fn failed_stage(&self) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.status == StageStatus::Failed)
    }

    pub fn is_complete(&self) -> bool {
        self.stages.iter().all(|s| s.status == StageStatus::Done)
    }

    /// Reset `stage` and everything after it to pending.
    pub fn invalidate_from(&mut self, stage: Stage) {
        for s in &mut self.stages[stage.index()..] {
            *s = StageRecord::pending(s.stage);
        }
    }

    pub fn load(dir: &Path) -> Option<RunManifest> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        write_atomic(&dir.join(MANIFEST_FILE), pretty_json(self).as_bytes())
    }

    /// True when the stage is done and every artifact on disk still matches.
    pub fn stage_intact(&self, stage: Stage, dir: &Path) -> bool {
        let rec = self.stage(stage);
        rec.status == StageStatus::Done
            && rec
                .artifacts
                .iter()
                .all(|(rel, digest)| std::fs::read(dir.join(rel)).is_ok_and(|bytes| &sha256_hex(&bytes) == digest))
    }
}

/// `SOURCE_DATE_EPOCH`, the reproducible-builds convention for pinned clocks.
pub fn pinned_timestamp() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()
}
