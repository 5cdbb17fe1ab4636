//! Synthetic interview transcripts for exercising the pipeline without
//! access-restricted clinical data.
//!
//! Each transcript is a short interviewer/participant exchange. Positive
//! records draw more participant lines from a low-mood phrase pool, negative
//! ones from a neutral pool; both share filler lines so the classes overlap.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DatasetError, GoldLabel, LabeledCorpus, LabeledRecord, Transcript};

const QUESTIONS: &[&str] = &[
    "How have you been feeling lately?",
    "How are you sleeping?",
    "What do you do to relax?",
    "How is your energy during the day?",
    "Tell me about your friends and family.",
    "What did you enjoy doing last week?",
    "How is work going?",
    "How do you feel about the future?",
];

const LOW_MOOD: &[&str] = &[
    "I feel tired all the time, even when I sleep a lot.",
    "Honestly I just don't enjoy things the way I used to.",
    "Most nights I lie awake and can't stop thinking.",
    "I've been pulling away from my friends lately.",
    "Some days it's hard to even get out of bed.",
    "I feel like I'm letting everyone down.",
    "Nothing really seems worth the effort anymore.",
    "I get irritated over small things and then feel guilty.",
    "My appetite has been off for weeks.",
    "I keep thinking I'm not good enough.",
];

const NEUTRAL: &[&str] = &[
    "Pretty good overall, work keeps me busy.",
    "I sleep fine, maybe seven hours most nights.",
    "I like going hiking on weekends with my brother.",
    "My energy is okay, coffee helps in the morning.",
    "We had a nice dinner with friends on Saturday.",
    "I'm looking forward to a trip next month.",
    "Work is stressful sometimes but manageable.",
    "I've been learning to cook new recipes.",
    "I feel mostly optimistic about things.",
    "I try to go running a few times a week.",
];

const FILLER: &[&str] = &[
    "I guess so, yeah.",
    "Um, it depends on the day.",
    "I'm not sure how to answer that.",
    "It's been a long year for everybody.",
    "I moved here about three years ago.",
    "My job is in customer support.",
];

/// Deterministic corpus of `n` records, `positive_fraction` of them positive.
/// Ids are `S0001`, `S0002`, … with labels interleaved by the seeded draw.
pub fn synthetic_corpus(n: usize, positive_fraction: f64, seed: u64) -> Result<LabeledCorpus, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pos = (n as f64 * positive_fraction.clamp(0.0, 1.0)).round() as usize;
    let mut labels: Vec<GoldLabel> = (0..n)
        .map(|i| {
            if i < n_pos {
                GoldLabel::Positive
            } else {
                GoldLabel::Negative
            }
        })
        .collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);

    let records = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let turns = rng.random_range(3..=6);
            let signal = match label {
                GoldLabel::Positive => 0.7,
                GoldLabel::Negative => 0.15,
            };
            let mut text = String::new();
            for t in 0..turns {
                if t > 0 {
                    text.push(' ');
                }
                let q = QUESTIONS.choose(&mut rng).expect("nonempty");
                let roll: f64 = rng.random();
                let a = if roll < signal {
                    LOW_MOOD.choose(&mut rng)
                } else if roll < 0.85 {
                    NEUTRAL.choose(&mut rng)
                } else {
                    FILLER.choose(&mut rng)
                }
                .expect("nonempty");
                text.push_str(&format!("Ellie: {q} Participant: {a}"));
            }
            Ok(LabeledRecord {
                transcript: Transcript::new(format!("S{:04}", i + 1), text)?,
                label,
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    LabeledCorpus::new(records)
}
