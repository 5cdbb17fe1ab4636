//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use promptscope::dataset::GoldLabel;
use promptscope::inference::{InferenceRecord, Prediction};

/// One record per (gold, prediction) pair; transcript ids are `t0`, `t1`, …
pub fn records_for(
    prompt_id: &str,
    pairs: &[(GoldLabel, Prediction)],
) -> (Vec<InferenceRecord>, BTreeMap<String, GoldLabel>) {
    let mut gold = BTreeMap::new();
    let records = pairs
        .iter()
        .enumerate()
        .map(|(i, &(g, p))| {
            let id = format!("t{i}");
            gold.insert(id.clone(), g);
            InferenceRecord {
                prompt_id: prompt_id.to_string(),
                transcript_id: id,
                run_index: 0,
                raw_output: String::new(),
                parsed: p,
                latency_ms: 0.0,
                backend_meta: BTreeMap::new(),
            }
        })
        .collect();
    (records, gold)
}

/// Brute-force metrics straight from the pairs, without confusion counts.
/// An invalid output is scored as the opposite of its gold label.
pub struct Recount {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_f1: f64,
}

fn div(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn class_f1(pairs: &[(GoldLabel, Prediction)], class: GoldLabel) -> (f64, f64, f64) {
    let effective = |g: GoldLabel, p: Prediction| p.label().unwrap_or(g.flipped());
    let predicted = pairs.iter().filter(|(g, p)| effective(*g, *p) == class).count();
    let actual = pairs.iter().filter(|(g, _)| *g == class).count();
    let hit = pairs
        .iter()
        .filter(|(g, p)| *g == class && effective(*g, *p) == class)
        .count();
    let precision = div(hit, predicted);
    let recall = div(hit, actual);
    (precision, recall, harmonic(precision, recall))
}

pub fn recount(pairs: &[(GoldLabel, Prediction)]) -> Recount {
    let correct = pairs.iter().filter(|(g, p)| p.label() == Some(*g)).count();
    let (precision, recall, f1) = class_f1(pairs, GoldLabel::Positive);
    let (_, _, neg_f1) = class_f1(pairs, GoldLabel::Negative);
    Recount {
        accuracy: div(correct, pairs.len()),
        precision,
        recall,
        f1,
        macro_f1: (f1 + neg_f1) / 2.0,
    }
}
