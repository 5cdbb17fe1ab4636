//! Generalization deltas and the human/machine-readable report bundle.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::{ConsistencyReport, MetricSet, PromptEvaluation, SliceKind};
use crate::promptgen::StrategyFamily;
use crate::selection::{rank_prompts, MetricRow, Recommendation};

/// Per-prompt evaluations for one split, as stored under `metrics/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub split: String,
    pub slice_kind: SliceKind,
    pub evaluations: Vec<PromptEvaluation>,
}

impl SplitMetrics {
    pub fn get(&self, prompt_id: &str) -> Option<&PromptEvaluation> {
        self.evaluations.iter().find(|e| e.prompt_id == prompt_id)
    }

    pub fn rows(&self) -> Vec<MetricRow> {
        self.evaluations
            .iter()
            .map(|e| MetricRow {
                prompt_id: e.prompt_id.clone(),
                metrics: e.metrics,
                sigma_f1: e.sigma_f1(),
            })
            .collect()
    }

    pub fn mean_macro_f1(&self) -> f64 {
        if self.evaluations.is_empty() {
            return 0.0;
        }
        self.evaluations.iter().map(|e| e.metrics.macro_f1).sum::<f64>() / self.evaluations.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideMetrics {
    #[serde(flatten)]
    pub metrics: MetricSet,
    pub sigma_f1: f64,
}

impl From<&PromptEvaluation> for SideMetrics {
    fn from(e: &PromptEvaluation) -> Self {
        SideMetrics {
            metrics: e.metrics,
            sigma_f1: e.sigma_f1(),
        }
    }
}

/// Out-of-sample minus in-sample for one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub prompt_id: String,
    pub in_sample: SideMetrics,
    pub out_of_sample: SideMetrics,
    pub delta_f1: f64,
    pub delta_bias: f64,
    pub delta_sigma: f64,
    pub abs_delta_f1: f64,
}

impl GeneralizationReport {
    pub fn between(in_sample: &PromptEvaluation, out_of_sample: &PromptEvaluation) -> GeneralizationReport {
        let is = SideMetrics::from(in_sample);
        let oos = SideMetrics::from(out_of_sample);
        let delta_f1 = oos.metrics.f1 - is.metrics.f1;
        GeneralizationReport {
            prompt_id: in_sample.prompt_id.clone(),
            in_sample: is,
            out_of_sample: oos,
            delta_f1,
            delta_bias: oos.metrics.bias - is.metrics.bias,
            delta_sigma: oos.sigma_f1 - is.sigma_f1,
            abs_delta_f1: delta_f1.abs(),
        }
    }
}

/// Family means over the prompts that were run out-of-sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyGeneralization {
    pub family: StrategyFamily,
    pub n_prompts: usize,
    pub is_f1: f64,
    pub oos_f1: f64,
    pub is_bias: f64,
    pub oos_bias: f64,
    pub is_sigma_f1: f64,
    pub oos_sigma_f1: f64,
    pub delta_f1: f64,
    pub delta_bias: f64,
    pub delta_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationSummary {
    pub chosen: GeneralizationReport,
    pub prompts: Vec<GeneralizationReport>,
    pub families: Vec<FamilyGeneralization>,
}

impl GeneralizationSummary {
    /// `None` if the chosen prompt is missing from either split.
    pub fn compute(
        chosen: &str,
        in_sample: &SplitMetrics,
        out_of_sample: &SplitMetrics,
    ) -> Option<GeneralizationSummary> {
        let prompts: Vec<GeneralizationReport> = out_of_sample
            .evaluations
            .iter()
            .filter_map(|oos| Some(GeneralizationReport::between(in_sample.get(&oos.prompt_id)?, oos)))
            .collect();
        let chosen = prompts.iter().find(|g| g.prompt_id == chosen)?.clone();

        let mut grouped: BTreeMap<StrategyFamily, Vec<&GeneralizationReport>> = BTreeMap::new();
        for g in &prompts {
            if let Some(f) = StrategyFamily::from_prompt_id(&g.prompt_id) {
                grouped.entry(f).or_default().push(g);
            }
        }
        let families = grouped
            .into_iter()
            .map(|(family, gs)| {
                let n = gs.len() as f64;
                let mean = |f: &dyn Fn(&GeneralizationReport) -> f64| gs.iter().map(|g| f(g)).sum::<f64>() / n;
                let is_f1 = mean(&|g| g.in_sample.metrics.f1);
                let oos_f1 = mean(&|g| g.out_of_sample.metrics.f1);
                let is_bias = mean(&|g| g.in_sample.metrics.bias);
                let oos_bias = mean(&|g| g.out_of_sample.metrics.bias);
                let is_sigma_f1 = mean(&|g| g.in_sample.sigma_f1);
                let oos_sigma_f1 = mean(&|g| g.out_of_sample.sigma_f1);
                FamilyGeneralization {
                    family,
                    n_prompts: gs.len(),
                    is_f1,
                    oos_f1,
                    is_bias,
                    oos_bias,
                    is_sigma_f1,
                    oos_sigma_f1,
                    delta_f1: oos_f1 - is_f1,
                    delta_bias: oos_bias - is_bias,
                    delta_sigma: oos_sigma_f1 - is_sigma_f1,
                }
            })
            .collect();
        Some(GeneralizationSummary {
            chosen,
            prompts,
            families,
        })
    }
}

pub struct ReportInputs<'a> {
    pub config_hash: &'a str,
    pub in_sample: &'a SplitMetrics,
    pub out_of_sample: &'a SplitMetrics,
    pub consistency: &'a ConsistencyReport,
    pub recommendation: &'a Recommendation,
    pub generalization: &'a GeneralizationSummary,
}

/// Renders every report file. Keys are paths relative to the output directory.
pub fn render_reports(inputs: &ReportInputs<'_>) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    files.insert(
        "reports/metrics.csv".to_string(),
        metrics_csv(&[inputs.in_sample, inputs.out_of_sample]),
    );
    files.insert(
        "reports/consistency.csv".to_string(),
        consistency_csv(inputs.consistency),
    );
    files.insert(
        "reports/generalization.csv".to_string(),
        generalization_csv(inputs.generalization),
    );
    files.insert("reports/summary.md".to_string(), summary_md(inputs));
    files
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

pub fn metrics_csv(splits: &[&SplitMetrics]) -> String {
    let header = [
        "prompt_id",
        "family",
        "split",
        "accuracy",
        "precision",
        "recall",
        "f1",
        "macro_f1",
        "bias",
        "sigma_f1",
        "n_slices",
        "invalid_rate",
    ];
    let rows = splits.iter().flat_map(|s| {
        s.evaluations.iter().map(|e| {
            let m = &e.metrics;
            vec![
                e.prompt_id.clone(),
                e.family.code().to_string(),
                e.split.clone(),
                m.accuracy.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
                m.macro_f1.to_string(),
                m.bias.to_string(),
                e.sigma_f1().to_string(),
                e.robustness.n.to_string(),
                e.counts.invalid_rate().to_string(),
            ]
        })
    });
    csv_string(&header, rows)
}

pub fn consistency_csv(c: &ConsistencyReport) -> String {
    let rows = c
        .pairs()
        .map(|(a, b, agree, kappa)| vec![a.to_string(), b.to_string(), agree.to_string(), kappa.to_string()]);
    csv_string(&["prompt_a", "prompt_b", "agreement", "kappa"], rows)
}

pub fn generalization_csv(g: &GeneralizationSummary) -> String {
    let header = [
        "family",
        "n_prompts",
        "is_f1",
        "oos_f1",
        "is_bias",
        "oos_bias",
        "is_sigma_f1",
        "oos_sigma_f1",
        "delta_f1",
        "delta_bias",
        "delta_sigma",
    ];
    let rows = g.families.iter().map(|f| {
        vec![
            f.family.code().to_string(),
            f.n_prompts.to_string(),
            f.is_f1.to_string(),
            f.oos_f1.to_string(),
            f.is_bias.to_string(),
            f.oos_bias.to_string(),
            f.is_sigma_f1.to_string(),
            f.oos_sigma_f1.to_string(),
            f.delta_f1.to_string(),
            f.delta_bias.to_string(),
            f.delta_sigma.to_string(),
        ]
    });
    csv_string(&header, rows)
}

fn approach(prompt_id: &str) -> String {
    StrategyFamily::from_prompt_id(prompt_id)
        .map(StrategyFamily::approach_label)
        .unwrap_or_else(|| "unknown".into())
}

/// Top-k table with columns Prompt ID | Approach | F1 | Accuracy | Precision / Recall.
pub fn top_prompts_table(in_sample: &SplitMetrics, recommendation: &Recommendation, k: usize) -> String {
    let ranked = rank_prompts(&in_sample.rows(), &recommendation.criteria_used).unwrap_or_default();
    let mut s = String::from("| Prompt ID | Approach | F1 | Accuracy | Precision / Recall |\n");
    s.push_str("|---|---|---|---|---|\n");
    for r in ranked.iter().take(k) {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "| {} | {} | {:.3} | {:.3} | {:.2} / {:.2} |",
            r.prompt_id,
            approach(&r.prompt_id),
            m.f1,
            m.accuracy,
            m.precision,
            m.recall
        );
    }
    s
}

pub fn recommendation_md(rec: &Recommendation) -> String {
    let mut s = String::from("# Prompt recommendation\n\n");
    let c = &rec.chosen;
    let _ = writeln!(s, "**Chosen:** {} ({})\n", c.prompt_id, approach(&c.prompt_id));
    let _ = writeln!(s, "{}\n", rec.rationale);
    s.push_str("## Thresholds\n\n");
    s.push_str("| Criterion | Requested | In force |\n|---|---|---|\n");
    let (q, u) = (&rec.criteria_requested, &rec.criteria_used);
    let _ = writeln!(s, "| bias_max | {:.2} | {:.2} |", q.bias_max, u.bias_max);
    let _ = writeln!(s, "| sigma_max | {:.2} | {:.2} |", q.sigma_max, u.sigma_max);
    let _ = writeln!(s, "| min_recall | {:.2} | {:.2} |", q.min_recall, u.min_recall);
    if !rec.relaxed.is_empty() {
        let _ = writeln!(s, "\nRelaxed gates: {}", rec.relaxed.join(", "));
    }
    s.push_str("\n## Ranking\n\n| Rank | Prompt ID | F1 | Bias | sigma(F1) | Eligible |\n|---|---|---|---|---|---|\n");
    for r in std::iter::once(c).chain(&rec.runners_up) {
        let _ = writeln!(
            s,
            "| {} | {} | {:.3} | {:.3} | {:.3} | {} |",
            r.rank,
            r.prompt_id,
            r.metrics.f1,
            r.metrics.bias,
            r.sigma_f1,
            if r.eligible { "yes" } else { "no" }
        );
    }
    s
}

fn summary_md(inputs: &ReportInputs<'_>) -> String {
    let rec = inputs.recommendation;
    let g = &inputs.generalization.chosen;
    let mut s = String::from("# Prompt evaluation summary\n\n");
    let _ = writeln!(s, "Config hash: `{}`\n", inputs.config_hash);
    s.push_str("## Top-5 prompts (in-sample)\n\n");
    s.push_str(&top_prompts_table(inputs.in_sample, rec, 5));
    s.push_str("\n## Recommendation\n\n");
    let _ = writeln!(s, "{}\n", rec.rationale);
    s.push_str("## Macro-F1\n\n");
    let _ = writeln!(
        s,
        "- Mean macro-F1 over all prompts, in-sample: {:.3}",
        inputs.in_sample.mean_macro_f1()
    );
    let _ = writeln!(
        s,
        "- Chosen prompt {} macro-F1, out-of-sample: {:.3}",
        g.prompt_id, g.out_of_sample.metrics.macro_f1
    );
    if inputs.out_of_sample.evaluations.len() > 1 {
        let _ = writeln!(
            s,
            "- Mean macro-F1 over {} prompts, out-of-sample: {:.3}",
            inputs.out_of_sample.evaluations.len(),
            inputs.out_of_sample.mean_macro_f1()
        );
    }
    s.push_str("\n## In-sample vs out-of-sample (chosen prompt)\n\n");
    s.push_str("| Split | F1 | Accuracy | Bias | sigma(F1) |\n|---|---|---|---|---|\n");
    for (name, side) in [("IS", &g.in_sample), ("OOS", &g.out_of_sample)] {
        let _ = writeln!(
            s,
            "| {name} | {:.3} | {:.3} | {:.3} | {:.3} |",
            side.metrics.f1, side.metrics.accuracy, side.metrics.bias, side.sigma_f1
        );
    }
    let _ = writeln!(
        s,
        "\nDelta F1 = {:+.3}, delta bias = {:+.3}, delta sigma = {:+.3}",
        g.delta_f1, g.delta_bias, g.delta_sigma
    );
    s.push_str("\n## Family view\n\n");
    s.push_str("| Family | Prompts | IS bias | OOS bias | IS sigma(F1) | OOS sigma(F1) |\n|---|---|---|---|---|---|\n");
    for f in &inputs.generalization.families {
        let _ = writeln!(
            s,
            "| {} | {} | {:.3} | {:.3} | {:.3} | {:.3} |",
            f.family, f.n_prompts, f.is_bias, f.oos_bias, f.is_sigma_f1, f.oos_sigma_f1
        );
    }
    s
}
