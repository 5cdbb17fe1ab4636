//! Prompt strategy families, the built-in prompt catalog and prompt rendering.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Transcript;
use crate::digest::{canonical_json, sha256_hex};

pub const PLACEHOLDER: &str = "{{transcript}}";

/// Final line of every built-in template; the label parser keys on it.
pub const ANSWER_DIRECTIVE: &str = "Answer with exactly: LABEL: DEPRESSED or LABEL: NOT_DEPRESSED";

pub const MAX_VARIANTS_PER_FAMILY: u8 = 4;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown strategy family {0:?}")]
    UnknownFamily(String),
    #[error("variant index {0} is outside 1..=4")]
    BadIndex(u8),
    #[error("per-family variant count {0} is outside 2..=4")]
    BadPerFamily(usize),
    #[error("filters select no prompt variants")]
    EmptyCatalog,
    #[error("template for {id} must contain {PLACEHOLDER} exactly once (found {count})")]
    BadTemplate { id: String, count: usize },
    #[error("catalog file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyFamily {
    DirectInstruction,
    RoleBased,
    ChainOfThought,
    SelfConsistency,
    ConstraintBased,
    AdaptiveChainOfThought,
    StructuredReasoning,
}

impl StrategyFamily {
    pub const ALL: [StrategyFamily; 7] = [
        StrategyFamily::DirectInstruction,
        StrategyFamily::RoleBased,
        StrategyFamily::ChainOfThought,
        StrategyFamily::SelfConsistency,
        StrategyFamily::ConstraintBased,
        StrategyFamily::AdaptiveChainOfThought,
        StrategyFamily::StructuredReasoning,
    ];

    pub fn code(self) -> &'static str {
        match self {
            StrategyFamily::DirectInstruction => "DI",
            StrategyFamily::RoleBased => "RP",
            StrategyFamily::ChainOfThought => "CoT",
            StrategyFamily::SelfConsistency => "SC",
            StrategyFamily::ConstraintBased => "CBP",
            StrategyFamily::AdaptiveChainOfThought => "ACP",
            StrategyFamily::StructuredReasoning => "SR",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            StrategyFamily::DirectInstruction => "Direct Instruction",
            StrategyFamily::RoleBased => "Role-Based Prompting",
            StrategyFamily::ChainOfThought => "Chain-of-Thought",
            StrategyFamily::SelfConsistency => "Self-Consistency",
            StrategyFamily::ConstraintBased => "Constraint-Based Prompting",
            StrategyFamily::AdaptiveChainOfThought => "Adaptive Chain-of-Thought",
            StrategyFamily::StructuredReasoning => "Structured Reasoning",
        }
    }

    /// Alternative spellings accepted on input.
    pub fn aliases(self) -> &'static [&'static str] {
        match self {
            StrategyFamily::SelfConsistency => &["SCP"],
            StrategyFamily::StructuredReasoning => &["SF"],
            _ => &[],
        }
    }

    /// "Direct Instruction (DI)"
    pub fn approach_label(self) -> String {
        format!("{} ({})", self.display_name(), self.code())
    }

    pub fn from_prompt_id(id: &str) -> Option<StrategyFamily> {
        let (family, _) = split_prompt_id(id)?;
        Some(family)
    }
}

impl fmt::Display for StrategyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for StrategyFamily {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyFamily::ALL
            .into_iter()
            .find(|f| f.code().eq_ignore_ascii_case(s) || f.aliases().iter().any(|a| a.eq_ignore_ascii_case(s)))
            .ok_or_else(|| CatalogError::UnknownFamily(s.to_string()))
    }
}

impl Serialize for StrategyFamily {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for StrategyFamily {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Splits "DI-2" into (family, 2). Aliases are accepted for the family part.
pub fn split_prompt_id(id: &str) -> Option<(StrategyFamily, u8)> {
    let (fam, idx) = id.rsplit_once('-')?;
    Some((fam.parse().ok()?, idx.parse().ok()?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptVariant {
    pub id: String,
    pub family: StrategyFamily,
    pub template: String,
    pub style_notes: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptCatalog {
    pub variants: Vec<PromptVariant>,
    pub catalog_hash: String,
}

impl PromptCatalog {
    pub fn from_variants(variants: Vec<PromptVariant>) -> PromptCatalog {
        let catalog_hash = content_hash(&variants);
        PromptCatalog { variants, catalog_hash }
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PromptVariant> {
        self.variants.iter().find(|v| v.id == id)
    }

    pub fn families(&self) -> Vec<StrategyFamily> {
        let mut seen = Vec::new();
        for v in &self.variants {
            if !seen.contains(&v.family) {
                seen.push(v.family);
            }
        }
        seen
    }

    pub fn to_json(&self) -> String {
        crate::digest::pretty_json(self)
    }

    pub fn load(path: &Path) -> Result<PromptCatalog, CatalogError> {
        let text = std::fs::read_to_string(path)?;
        PromptCatalog::from_json(&text)
    }

    /// A missing `catalog_hash` is filled in; a present one is kept as
    /// declared so that [`validate_catalog`] can report a mismatch.
    pub fn from_json(text: &str) -> Result<PromptCatalog, CatalogError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct CatalogFile {
            variants: Vec<PromptVariant>,
            catalog_hash: Option<String>,
        }
        let file: CatalogFile = serde_json::from_str(text)?;
        let computed = content_hash(&file.variants);
        Ok(PromptCatalog {
            variants: file.variants,
            catalog_hash: file.catalog_hash.unwrap_or(computed),
        })
    }
}

fn content_hash(variants: &[PromptVariant]) -> String {
    sha256_hex(canonical_json(&variants).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogConfig {
    /// Family codes or aliases; empty means all seven.
    pub families: Vec<String>,
    /// Variant indices 1..=4; empty means all up to `per_family`.
    pub indices: Vec<u8>,
    pub per_family: usize,
    /// Optional catalog.json overriding the built-in templates.
    pub path: Option<String>,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        CatalogConfig {
            families: Vec::new(),
            indices: Vec::new(),
            per_family: MAX_VARIANTS_PER_FAMILY as usize,
            path: None,
        }
    }
}

pub fn generate_catalog(config: &CatalogConfig) -> Result<PromptCatalog, CatalogError> {
    if !(2..=MAX_VARIANTS_PER_FAMILY as usize).contains(&config.per_family) {
        return Err(CatalogError::BadPerFamily(config.per_family));
    }
    let families: Vec<StrategyFamily> = if config.families.is_empty() {
        StrategyFamily::ALL.to_vec()
    } else {
        let parsed = config
            .families
            .iter()
            .map(|f| f.parse())
            .collect::<Result<HashSet<StrategyFamily>, _>>()?;
        StrategyFamily::ALL.into_iter().filter(|f| parsed.contains(f)).collect()
    };
    for &i in &config.indices {
        if !(1..=MAX_VARIANTS_PER_FAMILY).contains(&i) {
            return Err(CatalogError::BadIndex(i));
        }
    }
    let mut variants = Vec::new();
    for family in families {
        for (i, (template, notes)) in builtin_templates(family).iter().enumerate() {
            let index = i as u8 + 1;
            if index as usize > config.per_family {
                break;
            }
            if !config.indices.is_empty() && !config.indices.contains(&index) {
                continue;
            }
            variants.push(PromptVariant {
                id: format!("{}-{}", family.code(), index),
                family,
                template: format!("{template}\n\n{ANSWER_DIRECTIVE}"),
                style_notes: notes.to_string(),
                version: "1.0.0".to_string(),
            });
        }
    }
    if variants.is_empty() {
        return Err(CatalogError::EmptyCatalog);
    }
    Ok(PromptCatalog::from_variants(variants))
}

pub fn render_prompt(variant: &PromptVariant, transcript: &Transcript) -> Result<String, CatalogError> {
    let count = variant.template.matches(PLACEHOLDER).count();
    if count != 1 {
        return Err(CatalogError::BadTemplate {
            id: variant.id.clone(),
            count,
        });
    }
    Ok(variant.template.replacen(PLACEHOLDER, transcript.text(), 1))
}

/// Expected shape to check a catalog against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogProfile {
    pub total: Option<usize>,
    pub per_family: Option<usize>,
}

impl CatalogProfile {
    /// Seven families, four variants each.
    pub const DEFAULT: CatalogProfile = CatalogProfile {
        total: Some(28),
        per_family: Some(4),
    };
    /// Only per-variant and ordering rules.
    pub const ANY: CatalogProfile = CatalogProfile {
        total: None,
        per_family: None,
    };
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId(String),
    MalformedId(String),
    FamilyMismatch {
        id: String,
        family: StrategyFamily,
    },
    PlaceholderCount {
        id: String,
        count: usize,
    },
    EmptyTemplate(String),
    BadVersion {
        id: String,
        version: String,
    },
    OutOfOrder {
        id: String,
    },
    TotalCount {
        expected: usize,
        actual: usize,
    },
    FamilyCount {
        family: StrategyFamily,
        expected: usize,
        actual: usize,
    },
    HashMismatch {
        declared: String,
        computed: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId(id) => write!(f, "duplicate variant id {id}"),
            Violation::MalformedId(id) => write!(f, "variant id {id:?} is not <FAMILY>-<1..4>"),
            Violation::FamilyMismatch { id, family } => {
                write!(f, "variant {id} declares family {family} but its id names another")
            }
            Violation::PlaceholderCount { id, count } => {
                write!(f, "variant {id} has {count} {PLACEHOLDER} placeholders, expected 1")
            }
            Violation::EmptyTemplate(id) => write!(f, "variant {id} has an empty template"),
            Violation::BadVersion { id, version } => {
                write!(
                    f,
                    "variant {id} version {version:?} is not semantic (MAJOR.MINOR.PATCH)"
                )
            }
            Violation::OutOfOrder { id } => write!(f, "variant {id} breaks family/index ordering"),
            Violation::TotalCount { expected, actual } => {
                write!(f, "catalog has {actual} variants, expected {expected}")
            }
            Violation::FamilyCount {
                family,
                expected,
                actual,
            } => write!(f, "family {family} has {actual} variants, expected {expected}"),
            Violation::HashMismatch { declared, computed } => {
                write!(f, "catalog_hash {declared} does not match content {computed}")
            }
        }
    }
}

fn is_semver(v: &str) -> bool {
    let core = v.split(['-', '+']).next().unwrap_or("");
    let parts: Vec<_> = core.split('.').collect();
    parts.len() == 3
        && parts
            .iter()
            .all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()))
}

/// Empty result iff every variant and catalog invariant holds.
pub fn validate_catalog(catalog: &PromptCatalog, profile: &CatalogProfile) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut last_key: Option<(StrategyFamily, u8)> = None;
    let mut per_family: BTreeMap<StrategyFamily, usize> = BTreeMap::new();

    for v in &catalog.variants {
        if !seen.insert(v.id.as_str()) {
            out.push(Violation::DuplicateId(v.id.clone()));
        }
        *per_family.entry(v.family).or_default() += 1;
        match v
            .id
            .rsplit_once('-')
            .and_then(|(fam, idx)| Some((fam, idx.parse::<u8>().ok()?)))
        {
            Some((fam, idx)) if (1..=MAX_VARIANTS_PER_FAMILY).contains(&idx) && fam == v.family.code() => {
                let key = (v.family, idx);
                if last_key.is_some_and(|prev| key <= prev) {
                    out.push(Violation::OutOfOrder { id: v.id.clone() });
                }
                last_key = Some(key);
            }
            Some((fam, idx))
                if (1..=MAX_VARIANTS_PER_FAMILY).contains(&idx) && fam.parse::<StrategyFamily>().is_ok() =>
            {
                out.push(Violation::FamilyMismatch {
                    id: v.id.clone(),
                    family: v.family,
                });
            }
            _ => out.push(Violation::MalformedId(v.id.clone())),
        }
        if v.template.trim().is_empty() {
            out.push(Violation::EmptyTemplate(v.id.clone()));
        }
        let count = v.template.matches(PLACEHOLDER).count();
        if count != 1 {
            out.push(Violation::PlaceholderCount {
                id: v.id.clone(),
                count,
            });
        }
        if !is_semver(&v.version) {
            out.push(Violation::BadVersion {
                id: v.id.clone(),
                version: v.version.clone(),
            });
        }
    }

    if let Some(expected) = profile.total {
        if catalog.len() != expected {
            out.push(Violation::TotalCount {
                expected,
                actual: catalog.len(),
            });
        }
    }
    if let Some(expected) = profile.per_family {
        for family in StrategyFamily::ALL {
            let actual = per_family.get(&family).copied().unwrap_or(0);
            if actual != expected {
                out.push(Violation::FamilyCount {
                    family,
                    expected,
                    actual,
                });
            }
        }
    }
    let computed = content_hash(&catalog.variants);
    if computed != catalog.catalog_hash {
        out.push(Violation::HashMismatch {
            declared: catalog.catalog_hash.clone(),
            computed,
        });
    }
    out
}

/// Template bodies (without the answer directive) and style notes, four per family.
fn builtin_templates(family: StrategyFamily) -> [(&'static str, &'static str); 4] {
    match family {
        StrategyFamily::DirectInstruction => [
            (
                "Read the interview transcript below and decide whether the participant shows signs of depression.\n\nTranscript:\n{{transcript}}",
                "plain instruction, no persona",
            ),
            (
                "Task: binary screening for depression.\nInput: an interview transcript.\nOutput: one label.\n\nTranscript:\n{{transcript}}",
                "terse task/input/output framing",
            ),
            (
                "Classify the following clinical interview transcript as DEPRESSED or NOT_DEPRESSED based on what the participant says.\n\n\"\"\"\n{{transcript}}\n\"\"\"",
                "explicit label vocabulary, quoted transcript",
            ),
            (
                "Decide if the speaker in this transcript is likely to meet screening criteria for depression. Use only the transcript.\n\n{{transcript}}",
                "grounding restriction to transcript content",
            ),
        ],
        StrategyFamily::RoleBased => [
            (
                "You are a licensed clinical psychologist reviewing an intake interview. Assess whether the participant presents with depression.\n\nInterview:\n{{transcript}}",
                "clinician persona",
            ),
            (
                "You are a psychiatric nurse performing a first-line depression screen. Review the conversation and give your screening decision.\n\nConversation:\n{{transcript}}",
                "screening nurse persona",
            ),
            (
                "Act as an experienced mental-health screener who is careful not to miss people who need follow-up. Read the interview and decide.\n\nInterview:\n{{transcript}}",
                "screener persona, recall-leaning framing",
            ),
            (
                "You are a research assistant coding interview transcripts for a depression study, following the study's screening protocol.\n\nTranscript to code:\n{{transcript}}",
                "research coder persona",
            ),
        ],
        StrategyFamily::ChainOfThought => [
            (
                "Read the interview transcript. Think step by step about mood, energy, sleep, interest and self-worth before deciding whether the participant is depressed.\n\nTranscript:\n{{transcript}}",
                "step-by-step over symptom domains",
            ),
            (
                "Let's think step by step. First list the statements in the transcript that are relevant to mood. Then weigh them. Then decide.\n\nTranscript:\n{{transcript}}",
                "evidence list, weigh, decide",
            ),
            (
                "Reason through the transcript one exchange at a time, noting any indicator of depressive symptoms, and then give a final decision.\n\nTranscript:\n{{transcript}}",
                "turn-by-turn reasoning",
            ),
            (
                "Explain your reasoning briefly, step by step, about whether this participant shows depressive symptoms, then state the final label.\n\nTranscript:\n{{transcript}}",
                "brief rationale then label",
            ),
        ],
        StrategyFamily::SelfConsistency => [
            (
                "Think step by step about whether the participant is depressed. After reaching a conclusion, re-check it against the transcript and revise it if the evidence does not support it.\n\nTranscript:\n{{transcript}}",
                "reason, then self-check",
            ),
            (
                "Consider two independent lines of reasoning about this transcript, one focusing on mood and one on daily functioning. If they disagree, reconcile them before deciding.\n\nTranscript:\n{{transcript}}",
                "two reasoning paths, reconcile",
            ),
            (
                "Decide whether the participant is depressed. Then argue briefly against your own decision and keep it only if it survives the counter-argument.\n\nTranscript:\n{{transcript}}",
                "self-critique",
            ),
            (
                "Reason about the transcript three times from scratch and report the label that the majority of your attempts reach.\n\nTranscript:\n{{transcript}}",
                "internal majority vote instruction",
            ),
        ],
        StrategyFamily::ConstraintBased => [
            (
                "Decide whether the participant is depressed. You may only rely on statements you can quote from the transcript; do not infer from tone or demographics.\n\nTranscript:\n{{transcript}}",
                "evidence must be quotable",
            ),
            (
                "Screen the transcript for depression. Constraints: cite at least one participant statement supporting your decision; if no statement supports DEPRESSED, answer NOT_DEPRESSED.\n\nTranscript:\n{{transcript}}",
                "citation constraint with default rule",
            ),
            (
                "Imagine the participant had said the opposite about their mood and sleep. Would your decision change? Use this counterfactual to check whether the transcript really supports a depression label.\n\nTranscript:\n{{transcript}}",
                "counterfactual framing",
            ),
            (
                "Decide whether the participant is depressed while following these rules: ignore the interviewer's questions, ignore small talk, and base the decision only on the participant's self-reports.\n\nTranscript:\n{{transcript}}",
                "scope constraints on evidence",
            ),
        ],
        StrategyFamily::AdaptiveChainOfThought => [
            (
                "If the transcript is clear-cut, decide directly. If it is ambiguous, reason step by step through the symptom evidence before deciding.\n\nTranscript:\n{{transcript}}",
                "depth adapts to ambiguity",
            ),
            (
                "Start with a one-sentence impression of the participant's mood. Only if that impression is uncertain, expand into a detailed step-by-step analysis.\n\nTranscript:\n{{transcript}}",
                "impression first, expand on uncertainty",
            ),
            (
                "Estimate how much evidence the transcript contains about depression (little, some, a lot) and scale the length of your reasoning to match before deciding.\n\nTranscript:\n{{transcript}}",
                "reasoning length scaled to evidence",
            ),
            (
                "Reason step by step, but stop as soon as you have enough evidence to decide confidently.\n\nTranscript:\n{{transcript}}",
                "early-exit reasoning",
            ),
        ],
        StrategyFamily::StructuredReasoning => [
            (
                "Analyse the transcript using these sections:\n1. Mood\n2. Interest and pleasure\n3. Sleep and energy\n4. Self-worth\n5. Decision\n\nTranscript:\n{{transcript}}",
                "symptom-domain sections",
            ),
            (
                "Fill in this form for the transcript:\nEvidence for depression:\nEvidence against depression:\nOverall weight of evidence:\nDecision:\n\nTranscript:\n{{transcript}}",
                "for/against form",
            ),
            (
                "Structure your answer as: Summary (two sentences); Key indicators (bullet list); Risk level (low/medium/high); Decision.\n\nTranscript:\n{{transcript}}",
                "summary, indicators, risk, decision",
            ),
            (
                "Score each item from 0 to 3 based on the transcript: low mood, loss of interest, sleep problems, fatigue, feelings of worthlessness. Sum the scores and decide.\n\nTranscript:\n{{transcript}}",
                "questionnaire-style item scoring",
            ),
        ],
    }
}
