//! Prompt ranking and recommendation.
//!
//! Ranking is lexicographic rather than a weighted score: prompts that pass
//! the bias / sigma / recall gates come first, then higher F1, then lower
//! bias, lower sigma, and finally prompt id.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::metrics::{MetricSet, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionCriteria {
    pub bias_max: f64,
    pub sigma_max: f64,
    pub min_recall: f64,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        SelectionCriteria {
            bias_max: 0.40,
            sigma_max: 0.10,
            min_recall: 0.0,
        }
    }
}

impl SelectionCriteria {
    /// Every prompt passes (F1 sample deviations never exceed 1).
    pub const PERMISSIVE: SelectionCriteria = SelectionCriteria {
        bias_max: 1.0,
        sigma_max: 1.0,
        min_recall: 0.0,
    };

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("bias_max", self.bias_max),
            ("sigma_max", self.sigma_max),
            ("min_recall", self.min_recall),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        Ok(())
    }

    fn exclusion_reasons(&self, row: &MetricRow) -> Vec<String> {
        let mut reasons = Vec::new();
        if row.metrics.bias > self.bias_max {
            reasons.push(format!("bias {:.3} > bias_max {:.3}", row.metrics.bias, self.bias_max));
        }
        if row.sigma_f1 > self.sigma_max {
            reasons.push(format!(
                "sigma_f1 {:.3} > sigma_max {:.3}",
                row.sigma_f1, self.sigma_max
            ));
        }
        if row.metrics.recall < self.min_recall {
            reasons.push(format!(
                "recall {:.3} < min_recall {:.3}",
                row.metrics.recall, self.min_recall
            ));
        }
        reasons
    }
}

/// One prompt's input to ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub prompt_id: String,
    pub metrics: MetricSet,
    pub sigma_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrompt {
    pub prompt_id: String,
    pub metrics: MetricSet,
    pub sigma_f1: f64,
    pub rank: usize,
    pub eligible: bool,
    pub exclusion_reasons: Vec<String>,
}

impl RankedPrompt {
    fn row(&self) -> MetricRow {
        MetricRow {
            prompt_id: self.prompt_id.clone(),
            metrics: self.metrics,
            sigma_f1: self.sigma_f1,
        }
    }
}

fn compare(a: &RankedPrompt, b: &RankedPrompt) -> Ordering {
    b.eligible
        .cmp(&a.eligible)
        .then(b.metrics.f1.total_cmp(&a.metrics.f1))
        .then(a.metrics.bias.total_cmp(&b.metrics.bias))
        .then(a.sigma_f1.total_cmp(&b.sigma_f1))
        .then(a.prompt_id.cmp(&b.prompt_id))
}

pub fn rank_prompts(rows: &[MetricRow], criteria: &SelectionCriteria) -> Result<Vec<RankedPrompt>, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyEvaluation);
    }
    let mut ranked: Vec<RankedPrompt> = rows
        .iter()
        .map(|row| {
            let exclusion_reasons = criteria.exclusion_reasons(row);
            RankedPrompt {
                prompt_id: row.prompt_id.clone(),
                metrics: row.metrics,
                sigma_f1: row.sigma_f1,
                rank: 0,
                eligible: exclusion_reasons.is_empty(),
                exclusion_reasons,
            }
        })
        .collect();
    ranked.sort_by(compare);
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub chosen: RankedPrompt,
    pub runners_up: Vec<RankedPrompt>,
    pub rationale: String,
    /// Thresholds in force after any relaxation.
    pub criteria_used: SelectionCriteria,
    /// Thresholds as configured.
    pub criteria_requested: SelectionCriteria,
    /// Gates disabled to reach a choice, in the order they were dropped.
    pub relaxed: Vec<String>,
}

/// Picks the first eligible prompt. With none eligible, the sigma gate is
/// dropped, then the bias gate, then the recall floor, until one qualifies.
pub fn recommend(
    ranked: &[RankedPrompt],
    criteria: &SelectionCriteria,
    k: usize,
) -> Result<Recommendation, MetricsError> {
    if ranked.is_empty() {
        return Err(MetricsError::EmptyEvaluation);
    }
    let rows: Vec<MetricRow> = ranked.iter().map(RankedPrompt::row).collect();
    let mut effective = *criteria;
    let mut relaxed = Vec::new();
    let mut current = rank_prompts(&rows, &effective)?;
    type Relax = fn(&mut SelectionCriteria);
    let steps: [(&str, Relax); 3] = [
        ("sigma_max", |c| c.sigma_max = 1.0),
        ("bias_max", |c| c.bias_max = 1.0),
        ("min_recall", |c| c.min_recall = 0.0),
    ];
    for (name, relax) in steps {
        if current[0].eligible {
            break;
        }
        relax(&mut effective);
        relaxed.push(name.to_string());
        current = rank_prompts(&rows, &effective)?;
    }
    let chosen = current[0].clone();
    let runners_up: Vec<RankedPrompt> = current.iter().skip(1).take(k.saturating_sub(1)).cloned().collect();
    let rationale = rationale_text(&chosen, current.len(), criteria, &relaxed, runners_up.first());
    Ok(Recommendation {
        chosen,
        runners_up,
        rationale,
        criteria_used: effective,
        criteria_requested: *criteria,
        relaxed,
    })
}

fn rationale_text(
    chosen: &RankedPrompt,
    n: usize,
    criteria: &SelectionCriteria,
    relaxed: &[String],
    next: Option<&RankedPrompt>,
) -> String {
    let m = &chosen.metrics;
    let mut s = format!(
        "Selected {} (rank 1 of {n}) for the highest F1 among eligible prompts: f1={:.3}, bias={:.3}, sigma_f1={:.3} (precision={:.3}, recall={:.3}, accuracy={:.3}). Criteria: bias_max={:.2}, sigma_max={:.2}, min_recall={:.2}.",
        chosen.prompt_id, m.f1, m.bias, chosen.sigma_f1, m.precision, m.recall, m.accuracy,
        criteria.bias_max, criteria.sigma_max, criteria.min_recall,
    );
    if !relaxed.is_empty() {
        s.push_str(&format!(
            " No prompt met every threshold; relaxed in order: {}.",
            relaxed.join(" disabled, then ") + " disabled"
        ));
    }
    if let Some(r) = next {
        s.push_str(&format!(
            " Runner-up {}: f1={:.3}, bias={:.3}, sigma_f1={:.3}.",
            r.prompt_id, r.metrics.f1, r.metrics.bias, r.sigma_f1
        ));
    }
    s
}
