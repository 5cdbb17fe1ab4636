//! Predictive metrics (accuracy, precision, recall, F1, macro-F1), behavioral
//! metrics (bias, robustness) and inter-prompt consistency.
//!
//! Unparseable outputs are scored under a strict policy: an invalid answer on
//! a positive item is a false negative, on a negative item a false positive.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{GoldLabel, PartitionSet};
use crate::inference::{InferenceRecord, Prediction};
use crate::promptgen::StrategyFamily;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no gold label for transcript {0:?}")]
    GoldMissing(String),
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("robustness needs at least 2 slices, got {0}")]
    TooFewSlices(usize),
    #[error("prompts {a} and {b} were evaluated on different transcripts")]
    MisalignedPredictions { a: String, b: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    /// Invalid predictions; already folded into `fn_` / `fp`.
    pub invalid_count: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, gold: GoldLabel, pred: Prediction) {
        match (gold, pred) {
            (GoldLabel::Positive, Prediction::Positive) => self.tp += 1,
            (GoldLabel::Positive, Prediction::Negative) => self.fn_ += 1,
            (GoldLabel::Negative, Prediction::Positive) => self.fp += 1,
            (GoldLabel::Negative, Prediction::Negative) => self.tn += 1,
            (GoldLabel::Positive, Prediction::Invalid) => {
                self.fn_ += 1;
                self.invalid_count += 1;
            }
            (GoldLabel::Negative, Prediction::Invalid) => {
                self.fp += 1;
                self.invalid_count += 1;
            }
        }
    }

    pub fn invalid_rate(&self) -> f64 {
        ratio(self.invalid_count, self.total())
    }
}

pub fn confusion<'a>(
    records: impl IntoIterator<Item = &'a InferenceRecord>,
    gold: &BTreeMap<String, GoldLabel>,
) -> Result<ConfusionCounts, MetricsError> {
    let mut c = ConfusionCounts::default();
    for r in records {
        let g = gold
            .get(&r.transcript_id)
            .ok_or_else(|| MetricsError::GoldMissing(r.transcript_id.clone()))?;
        c.add(*g, r.parsed);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_f1: f64,
    pub bias: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// |precision − recall|
pub fn bias(precision: f64, recall: f64) -> f64 {
    (precision - recall).abs()
}

pub fn metric_set(c: &ConfusionCounts) -> Result<MetricSet, MetricsError> {
    let total = c.total();
    if total == 0 {
        return Err(MetricsError::EmptyEvaluation);
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = f1_score(precision, recall);
    // Negative class: tn plays tp, fn plays fp, fp plays fn.
    let neg_f1 = f1_score(ratio(c.tn, c.tn + c.fn_), ratio(c.tn, c.tn + c.fp));
    Ok(MetricSet {
        accuracy: ratio(c.tp + c.tn, total),
        precision,
        recall,
        f1,
        macro_f1: (f1 + neg_f1) / 2.0,
        bias: bias(precision, recall),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceKind {
    Partition,
    RepeatedRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub f1_per_slice: Vec<f64>,
    pub mean_f1: f64,
    pub sigma_f1: f64,
    pub n: usize,
    pub slice_kind: SliceKind,
}

/// Sample standard deviation of per-slice F1 (n − 1 denominator).
pub fn robustness(f1_per_slice: &[f64], slice_kind: SliceKind) -> Result<RobustnessReport, MetricsError> {
    let n = f1_per_slice.len();
    if n < 2 {
        return Err(MetricsError::TooFewSlices(n));
    }
    // Welford: a constant list yields exactly zero.
    let (mut mean, mut ss) = (0.0, 0.0);
    for (i, &x) in f1_per_slice.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        ss += delta * (x - mean);
    }
    Ok(RobustnessReport {
        f1_per_slice: f1_per_slice.to_vec(),
        mean_f1: mean,
        sigma_f1: (ss / (n - 1) as f64).sqrt(),
        n,
        slice_kind,
    })
}

/// Pairwise agreement and Cohen's κ between prompts, stored as symmetric
/// matrices indexed in `prompts` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub prompts: Vec<String>,
    pub agreement: Vec<Vec<f64>>,
    pub kappa: Vec<Vec<f64>>,
}

impl ConsistencyReport {
    fn index(&self, id: &str) -> Option<usize> {
        self.prompts.iter().position(|p| p == id)
    }

    pub fn agreement(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.agreement[self.index(a)?][self.index(b)?])
    }

    pub fn kappa(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.kappa[self.index(a)?][self.index(b)?])
    }

    /// Upper-triangle pairs (a < b in `prompts` order).
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str, f64, f64)> + '_ {
        let n = self.prompts.len();
        (0..n).flat_map(move |i| {
            (i + 1..n).map(move |j| {
                (
                    self.prompts[i].as_str(),
                    self.prompts[j].as_str(),
                    self.agreement[i][j],
                    self.kappa[i][j],
                )
            })
        })
    }
}

/// Observed agreement and Cohen's κ over {positive, negative, invalid}.
pub fn agreement_and_kappa(a: &[Prediction], b: &[Prediction]) -> (f64, f64) {
    assert_eq!(a.len(), b.len(), "prediction vectors differ in length");
    let n = a.len();
    if n == 0 {
        return (1.0, 1.0);
    }
    let cats = [Prediction::Positive, Prediction::Negative, Prediction::Invalid];
    let p_o = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n as f64;
    let freq = |v: &[Prediction], c: Prediction| v.iter().filter(|&&x| x == c).count() as f64 / n as f64;
    let p_e: f64 = cats.iter().map(|&c| freq(a, c) * freq(b, c)).sum();
    let kappa = if (1.0 - p_e).abs() < f64::EPSILON {
        if p_o == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    (p_o, kappa)
}

pub fn consistency(
    records_by_prompt: &BTreeMap<String, BTreeMap<String, Prediction>>,
) -> Result<ConsistencyReport, MetricsError> {
    let prompts: Vec<String> = records_by_prompt.keys().cloned().collect();
    let mut first: Option<(&String, BTreeSet<&String>)> = None;
    for (p, preds) in records_by_prompt {
        let ids: BTreeSet<&String> = preds.keys().collect();
        match &first {
            None => first = Some((p, ids)),
            Some((p0, ids0)) if *ids0 != ids => {
                return Err(MetricsError::MisalignedPredictions {
                    a: (*p0).clone(),
                    b: p.clone(),
                })
            }
            _ => {}
        }
    }
    let vectors: Vec<Vec<Prediction>> = records_by_prompt
        .values()
        .map(|m| m.values().copied().collect())
        .collect();
    let n = prompts.len();
    let mut agreement = vec![vec![1.0; n]; n];
    let mut kappa = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let (po, k) = agreement_and_kappa(&vectors[i], &vectors[j]);
            agreement[i][j] = po;
            agreement[j][i] = po;
            kappa[i][j] = k;
            kappa[j][i] = k;
        }
    }
    Ok(ConsistencyReport {
        prompts,
        agreement,
        kappa,
    })
}

/// How a prompt's F1 is sliced for robustness.
#[derive(Debug, Clone, PartialEq)]
pub enum Slicing {
    Partitions(PartitionSet),
    /// One slice per run index; needs at least two runs.
    RepeatedRuns,
}

impl Slicing {
    pub fn kind(&self) -> SliceKind {
        match self {
            Slicing::Partitions(_) => SliceKind::Partition,
            Slicing::RepeatedRuns => SliceKind::RepeatedRun,
        }
    }
}

/// Everything computed for one prompt on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEvaluation {
    pub prompt_id: String,
    pub family: StrategyFamily,
    pub split: String,
    pub counts: ConfusionCounts,
    pub metrics: MetricSet,
    pub robustness: RobustnessReport,
}

impl PromptEvaluation {
    pub fn sigma_f1(&self) -> f64 {
        self.robustness.sigma_f1
    }
}

/// Groups records by prompt and evaluates each group, in prompt-id order.
pub fn evaluate_split(
    records: &[InferenceRecord],
    gold: &BTreeMap<String, GoldLabel>,
    slicing: &Slicing,
    split: &str,
) -> Result<Vec<PromptEvaluation>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyEvaluation);
    }
    let mut by_prompt: BTreeMap<&str, Vec<&InferenceRecord>> = BTreeMap::new();
    for r in records {
        by_prompt.entry(&r.prompt_id).or_default().push(r);
    }
    by_prompt
        .into_iter()
        .map(|(prompt_id, recs)| {
            let counts = confusion(recs.iter().copied(), gold)?;
            let metrics = metric_set(&counts)?;
            let f1s: Vec<f64> = match slicing {
                Slicing::Partitions(ps) => ps
                    .partitions
                    .iter()
                    .map(|part| {
                        let ids: BTreeSet<&str> = part.iter().map(String::as_str).collect();
                        let c = confusion(
                            recs.iter().copied().filter(|r| ids.contains(r.transcript_id.as_str())),
                            gold,
                        )?;
                        Ok(metric_set(&c)?.f1)
                    })
                    .collect::<Result<_, MetricsError>>()?,
                Slicing::RepeatedRuns => {
                    let runs: BTreeSet<u32> = recs.iter().map(|r| r.run_index).collect();
                    runs.into_iter()
                        .map(|run| {
                            let c = confusion(recs.iter().copied().filter(|r| r.run_index == run), gold)?;
                            Ok(metric_set(&c)?.f1)
                        })
                        .collect::<Result<_, MetricsError>>()?
                }
            };
            Ok(PromptEvaluation {
                prompt_id: prompt_id.to_string(),
                family: StrategyFamily::from_prompt_id(prompt_id).unwrap_or(StrategyFamily::DirectInstruction),
                split: split.to_string(),
                counts,
                metrics,
                robustness: robustness(&f1s, slicing.kind())?,
            })
        })
        .collect()
}

/// Run-0 predictions per prompt, keyed by transcript id.
pub fn predictions_by_prompt(records: &[InferenceRecord]) -> BTreeMap<String, BTreeMap<String, Prediction>> {
    let mut out: BTreeMap<String, BTreeMap<String, Prediction>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.run_index == 0) {
        out.entry(r.prompt_id.clone())
            .or_default()
            .insert(r.transcript_id.clone(), r.parsed);
    }
    out
}
