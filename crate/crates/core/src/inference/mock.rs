//! Deterministic synthetic backend.
//!
//! Every output is a pure function of (seed, prompt id, transcript id, run
//! index), so results do not depend on scheduling or process.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::parse::canonical_label_line;
use super::{Backend, BackendError, Completion, CompletionRequest, InferenceError};
use crate::dataset::GoldLabel;
use crate::digest::{stable_digest, unit_f64};
use crate::promptgen::StrategyFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockProfile {
    /// Probability of emitting the gold label, per family.
    pub accuracy: BTreeMap<StrategyFamily, f64>,
    /// Pushes the decision toward `positive` (> 0) or `negative` (< 0).
    #[serde(default)]
    pub positive_rate_shift: BTreeMap<StrategyFamily, f64>,
    /// Extra error rate on out-of-sample items.
    #[serde(default)]
    pub oos_drift: f64,
}

impl MockProfile {
    /// Same accuracy for every family, no shift, no drift.
    pub fn uniform(accuracy: f64) -> MockProfile {
        MockProfile {
            accuracy: StrategyFamily::ALL.iter().map(|&f| (f, accuracy)).collect(),
            positive_rate_shift: BTreeMap::new(),
            oos_drift: 0.0,
        }
    }

    /// Simple instructions beat long reasoning chains, with a recall lean.
    pub fn reference() -> MockProfile {
        use StrategyFamily::*;
        let accuracy = [
            (DirectInstruction, 0.90),
            (RoleBased, 0.86),
            (ChainOfThought, 0.78),
            (SelfConsistency, 0.80),
            (ConstraintBased, 0.84),
            (AdaptiveChainOfThought, 0.76),
            (StructuredReasoning, 0.80),
        ];
        let shift = [
            (DirectInstruction, 0.04),
            (RoleBased, 0.03),
            (ConstraintBased, 0.06),
            (ChainOfThought, -0.02),
        ];
        MockProfile {
            accuracy: accuracy.into_iter().collect(),
            positive_rate_shift: shift.into_iter().collect(),
            oos_drift: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (f, a) in &self.accuracy {
            if !(0.0..=1.0).contains(a) {
                return Err(format!("accuracy for {f} must be in [0, 1], got {a}"));
            }
        }
        for (f, s) in &self.positive_rate_shift {
            if !(-0.5..=0.5).contains(s) {
                return Err(format!("positive_rate_shift for {f} must be in [-0.5, 0.5], got {s}"));
            }
        }
        if !(0.0..=0.5).contains(&self.oos_drift) {
            return Err(format!("oos_drift must be in [0, 0.5], got {}", self.oos_drift));
        }
        Ok(())
    }

    /// Probability that the emitted label matches `gold`, clamped to [0, 1].
    pub fn correct_probability(&self, family: StrategyFamily, gold: GoldLabel, is_oos: bool) -> Option<f64> {
        let acc = *self.accuracy.get(&family)?;
        let shift = self.positive_rate_shift.get(&family).copied().unwrap_or(0.0);
        let signed = match gold {
            GoldLabel::Positive => shift,
            GoldLabel::Negative => -shift,
        };
        let drift = if is_oos { self.oos_drift } else { 0.0 };
        Some((acc - drift + signed).clamp(0.0, 1.0))
    }
}

fn draws(seed: u64, prompt_id: &str, transcript_id: &str, run_index: u32) -> [f64; 2] {
    let d = stable_digest(&[
        b"mock",
        &seed.to_le_bytes(),
        prompt_id.as_bytes(),
        transcript_id.as_bytes(),
        &run_index.to_le_bytes(),
    ]);
    let word = |i: usize| u64::from_le_bytes(d[i * 8..i * 8 + 8].try_into().expect("8 bytes"));
    [unit_f64(word(0)), unit_f64(word(1))]
}

pub fn mock_complete(
    prompt_id: &str,
    transcript_id: &str,
    run_index: u32,
    gold: GoldLabel,
    is_oos: bool,
    profile: &MockProfile,
    seed: u64,
) -> Result<String, InferenceError> {
    let family = StrategyFamily::from_prompt_id(prompt_id)
        .ok_or_else(|| InferenceError::ProfileIncomplete(prompt_id.to_string()))?;
    let p = profile
        .correct_probability(family, gold, is_oos)
        .ok_or_else(|| InferenceError::ProfileIncomplete(family.code().to_string()))?;
    let [u, _] = draws(seed, prompt_id, transcript_id, run_index);
    let label = if u < p { gold } else { gold.flipped() };
    Ok(canonical_label_line(label).to_string())
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    profile: MockProfile,
    seed: u64,
    model_id: String,
}

impl MockBackend {
    pub fn new(profile: MockProfile, seed: u64, model_id: impl Into<String>) -> MockBackend {
        MockBackend {
            profile,
            seed,
            model_id: model_id.into(),
        }
    }
}

impl Backend for MockBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let text = mock_complete(
            req.prompt_id,
            req.transcript_id,
            req.run_index,
            req.gold,
            req.is_oos,
            &self.profile,
            self.seed,
        )
        .map_err(|e| BackendError::Fatal(e.to_string()))?;
        let [_, v] = draws(self.seed, req.prompt_id, req.transcript_id, req.run_index);
        // Simulated latency, whole microseconds so it prints identically everywhere.
        let latency_ms = ((40.0 + 80.0 * v) * 1000.0).round() / 1000.0;
        Ok(Completion {
            text,
            finish_reason: "stop".into(),
            simulated_latency_ms: Some(latency_ms),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{parse_label, Prediction};

    #[test]
    fn degenerate_accuracies() {
        for (acc, flip) in [(1.0, false), (0.0, true)] {
            let profile = MockProfile::uniform(acc);
            for i in 0..200 {
                let gold = if i % 3 == 0 {
                    GoldLabel::Positive
                } else {
                    GoldLabel::Negative
                };
                let out = mock_complete("RP-2", &format!("t{i}"), 0, gold, false, &profile, 9).unwrap();
                let want = if flip { gold.flipped() } else { gold };
                assert_eq!(parse_label(&out), Prediction::from(want));
            }
        }
    }

    #[test]
    fn empirical_accuracy_concentrates() {
        let profile = MockProfile::uniform(0.8);
        let correct = (0..1000)
            .filter(|i| {
                let out = mock_complete("DI-1", &format!("t{i}"), 0, GoldLabel::Positive, false, &profile, 42).unwrap();
                parse_label(&out) == Prediction::Positive
            })
            .count();
        let rate = correct as f64 / 1000.0;
        assert!((0.76..=0.84).contains(&rate), "rate {rate}");
    }

    #[test]
    fn drift_and_shift_clamp() {
        let mut profile = MockProfile::uniform(0.9);
        profile.oos_drift = 0.3;
        profile
            .positive_rate_shift
            .insert(StrategyFamily::DirectInstruction, 0.2);
        let f = StrategyFamily::DirectInstruction;
        assert_eq!(profile.correct_probability(f, GoldLabel::Positive, false), Some(1.0));
        let p = profile.correct_probability(f, GoldLabel::Negative, true).unwrap();
        assert!((p - 0.4).abs() < 1e-12);
    }

    #[test]
    fn missing_family_is_reported() {
        let mut profile = MockProfile::uniform(0.5);
        profile.accuracy.remove(&StrategyFamily::StructuredReasoning);
        assert!(matches!(
            mock_complete("SR-1", "t", 0, GoldLabel::Negative, false, &profile, 1),
            Err(InferenceError::ProfileIncomplete(f)) if f == "SR"
        ));
    }
}
