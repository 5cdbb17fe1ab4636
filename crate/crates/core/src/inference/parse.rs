use serde::{Deserialize, Serialize};

use crate::dataset::GoldLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prediction {
    Positive,
    Negative,
    Invalid,
}

impl Prediction {
    pub fn label(self) -> Option<GoldLabel> {
        match self {
            Prediction::Positive => Some(GoldLabel::Positive),
            Prediction::Negative => Some(GoldLabel::Negative),
            Prediction::Invalid => None,
        }
    }
}

impl From<GoldLabel> for Prediction {
    fn from(l: GoldLabel) -> Self {
        match l {
            GoldLabel::Positive => Prediction::Positive,
            GoldLabel::Negative => Prediction::Negative,
        }
    }
}

pub fn canonical_label_line(label: GoldLabel) -> &'static str {
    match label {
        GoldLabel::Positive => "LABEL: DEPRESSED",
        GoldLabel::Negative => "LABEL: NOT_DEPRESSED",
    }
}

const NEGATIONS: [&str; 4] = ["not depressed", "no depression", "no signs of depression", "negative"];
const AFFIRMATIONS: [&str; 4] = ["depressed", "depression present", "positive", "yes"];

/// Ordered, case-insensitive label grammar. The canonical `LABEL:` directive
/// wins; otherwise negation phrases are tried before affirmation phrases so
/// that "not depressed" never reads as "depressed".
pub fn parse_label(raw_output: &str) -> Prediction {
    let text = raw_output.to_lowercase();
    if label_directive(&text, "not_depressed") {
        return Prediction::Negative;
    }
    if label_directive(&text, "depressed") {
        return Prediction::Positive;
    }
    if NEGATIONS.iter().any(|p| contains_phrase(&text, p)) {
        return Prediction::Negative;
    }
    if AFFIRMATIONS.iter().any(|p| contains_phrase(&text, p)) {
        return Prediction::Positive;
    }
    Prediction::Invalid
}

/// `label:` followed by optional whitespace and `value` as a whole word.
fn label_directive(text: &str, value: &str) -> bool {
    text.match_indices("label:").any(|(i, m)| {
        let rest = text[i + m.len()..].trim_start();
        rest.starts_with(value) && !rest[value.len()..].chars().next().is_some_and(is_word_char)
    })
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Substring match that does not start or end inside a word.
fn contains_phrase(text: &str, phrase: &str) -> bool {
    text.match_indices(phrase).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + phrase.len()..].chars().next();
        !before.is_some_and(is_word_char) && !after.is_some_and(is_word_char)
    })
}
