//! Labeled transcript corpora, in-sample subset construction and stratified
//! partitioning.
//!
//! The in-sample builder balances classes and, within each class, greedily
//! picks the transcript that adds the most not-yet-covered vocabulary.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("duplicate transcript id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: unknown label {label:?} (expected \"positive\" or \"negative\")")]
    BadLabel { line: usize, label: String },
    #[error("empty transcript{}", .0.as_deref().map(|id| format!(" {id:?}")).unwrap_or_default())]
    EmptyTranscript(Option<String>),
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("corpus has no {0} records")]
    ClassMissing(GoldLabel),
    #[error("in-sample size {size} is below the minimum of 2")]
    SampleTooSmall { size: usize },
    #[error("in-sample fraction {0} is outside (0, 1]")]
    BadFraction(f64),
    #[error("partition count must be at least 2, got {0}")]
    BadPartitionCount(usize),
    #[error("cannot stratify into {k} partitions: smallest class has {min_class} records")]
    PartitionInfeasible { k: usize, min_class: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary gold label. `Positive` means the screened condition is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldLabel {
    Positive,
    Negative,
}

impl GoldLabel {
    pub const ALL: [GoldLabel; 2] = [GoldLabel::Positive, GoldLabel::Negative];

    pub fn as_str(self) -> &'static str {
        match self {
            GoldLabel::Positive => "positive",
            GoldLabel::Negative => "negative",
        }
    }

    pub fn flipped(self) -> GoldLabel {
        match self {
            GoldLabel::Positive => GoldLabel::Negative,
            GoldLabel::Negative => GoldLabel::Positive,
        }
    }
}

impl fmt::Display for GoldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GoldLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(GoldLabel::Positive),
            "negative" => Ok(GoldLabel::Negative),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    id: String,
    text: String,
    token_count: usize,
}

impl Transcript {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, DatasetError> {
        let id = id.into();
        let text = text.into();
        if id.is_empty() {
            return Err(DatasetError::ParseError {
                line: 0,
                message: "transcript id is empty".into(),
            });
        }
        if text.trim().is_empty() {
            return Err(DatasetError::EmptyTranscript(Some(id)));
        }
        let token_count = text.split_whitespace().count();
        Ok(Transcript { id, text, token_count })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Number of whitespace-separated tokens in the raw text.
    pub fn token_count(&self) -> usize {
        self.token_count
    }
}

/// On-disk row shape shared by the JSONL and CSV corpus formats.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusRow {
    id: String,
    text: String,
    label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledRecord {
    pub transcript: Transcript,
    pub label: GoldLabel,
}

impl LabeledRecord {
    pub fn id(&self) -> &str {
        self.transcript.id()
    }
}

impl Serialize for LabeledRecord {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CorpusRow {
            id: self.transcript.id.clone(),
            text: self.transcript.text.clone(),
            label: self.label.as_str().to_string(),
        }
        .serialize(serializer)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledCorpus {
    records: Vec<LabeledRecord>,
    class_counts: BTreeMap<GoldLabel, usize>,
}

impl LabeledCorpus {
    pub fn new(records: Vec<LabeledRecord>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(records.len());
        let mut class_counts = BTreeMap::new();
        for r in &records {
            if !seen.insert(r.id()) {
                return Err(DatasetError::DuplicateId(r.id().to_string()));
            }
            *class_counts.entry(r.label).or_insert(0) += 1;
        }
        Ok(LabeledCorpus { records, class_counts })
    }

    pub fn records(&self) -> &[LabeledRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, label: GoldLabel) -> usize {
        self.class_counts.get(&label).copied().unwrap_or(0)
    }

    pub fn class_counts(&self) -> &BTreeMap<GoldLabel, usize> {
        &self.class_counts
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(LabeledRecord::id)
    }

    pub fn gold(&self) -> BTreeMap<String, GoldLabel> {
        self.records.iter().map(|r| (r.id().to_string(), r.label)).collect()
    }

    /// Sub-corpus with the given ids, in this corpus' order.
    pub fn subset(&self, ids: &BTreeSet<&str>) -> LabeledCorpus {
        let records: Vec<_> = self.records.iter().filter(|r| ids.contains(r.id())).cloned().collect();
        LabeledCorpus::new(records).expect("subset of a valid corpus")
    }

    /// One JSON object per line, in corpus order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("corpus rows serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guess from the file extension; anything but `.csv` is treated as JSONL.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LabeledCorpus, DatasetError> {
    let file = std::fs::File::open(path)?;
    read_corpus(file, format)
}

pub fn read_corpus<R: Read>(reader: R, format: CorpusFormat) -> Result<LabeledCorpus, DatasetError> {
    let rows = match format {
        CorpusFormat::Jsonl => read_jsonl_rows(reader)?,
        CorpusFormat::Csv => read_csv_rows(reader)?,
    };
    let mut records = Vec::with_capacity(rows.len());
    let mut seen = HashSet::new();
    for (line, row) in rows {
        if row.id.is_empty() {
            return Err(DatasetError::ParseError {
                line,
                message: "field \"id\" is empty".into(),
            });
        }
        if !seen.insert(row.id.clone()) {
            return Err(DatasetError::DuplicateId(row.id));
        }
        let label = row
            .label
            .parse::<GoldLabel>()
            .map_err(|label| DatasetError::BadLabel { line, label })?;
        let transcript = Transcript::new(row.id, row.text)?;
        records.push(LabeledRecord { transcript, label });
    }
    LabeledCorpus::new(records)
}

fn read_jsonl_rows<R: Read>(reader: R) -> Result<Vec<(usize, CorpusRow)>, DatasetError> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: CorpusRow = serde_json::from_str(&line).map_err(|e| DatasetError::ParseError {
            line: line_no,
            message: e.to_string(),
        })?;
        rows.push((line_no, row));
    }
    Ok(rows)
}

fn read_csv_rows<R: Read>(reader: R) -> Result<Vec<(usize, CorpusRow)>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut rows = Vec::new();
    for result in rdr.deserialize::<CorpusRow>() {
        match result {
            Ok(row) => {
                let line = rows.len() + 2;
                rows.push((line, row));
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(rows.len() + 2);
                return Err(DatasetError::ParseError {
                    line,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(rows)
}

/// Lowercased whitespace tokens with leading/trailing punctuation removed.
/// Tokens that are pure punctuation are dropped.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|raw| {
        let t = raw.trim_matches(|c: char| c.is_ascii_punctuation() || is_unicode_punct(c));
        (!t.is_empty()).then(|| t.to_lowercase())
    })
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2010}'..='\u{2027}' | '\u{00A1}' | '\u{00BF}' | '\u{00AB}' | '\u{00BB}' | '\u{2039}' | '\u{203A}'
    )
}

/// Type-token ratio: unique lowercased tokens over total tokens.
pub fn lexical_diversity(text: &str) -> Result<f64, DatasetError> {
    let mut total = 0usize;
    let mut unique = HashSet::new();
    for tok in tokenize(text) {
        total += 1;
        unique.insert(tok);
    }
    if total == 0 {
        return Err(DatasetError::EmptyTranscript(None));
    }
    Ok(unique.len() as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub in_sample_fraction: f64,
    pub seed: u64,
    /// 1.0 selects purely by vocabulary gain, 0.0 purely by seeded draw.
    pub diversity_weight: f64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            in_sample_fraction: 0.2,
            seed: 0,
            diversity_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub in_sample: LabeledCorpus,
    pub out_of_sample: LabeledCorpus,
}

/// Contents of `split_manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub seed: u64,
    pub in_sample_fraction: f64,
    pub diversity_weight: f64,
    pub in_sample_counts: BTreeMap<GoldLabel, usize>,
    pub out_of_sample_counts: BTreeMap<GoldLabel, usize>,
}

impl CorpusSplit {
    pub fn summary(&self, plan: &SamplePlan) -> SplitSummary {
        let counts = |c: &LabeledCorpus| {
            GoldLabel::ALL
                .iter()
                .map(|&l| (l, c.count(l)))
                .collect::<BTreeMap<_, _>>()
        };
        SplitSummary {
            seed: plan.seed,
            in_sample_fraction: plan.in_sample_fraction,
            diversity_weight: plan.diversity_weight,
            in_sample_counts: counts(&self.in_sample),
            out_of_sample_counts: counts(&self.out_of_sample),
        }
    }
}

/// Per-class quotas for an in-sample subset of `size` records.
fn class_quotas(size: usize, n_pos: usize, n_neg: usize) -> (usize, usize) {
    let half = size / 2;
    let (mut pos, mut neg) = if size.is_multiple_of(2) {
        (half, half)
    } else if n_pos >= n_neg {
        (half + 1, half)
    } else {
        (half, half + 1)
    };
    // Short class hands its remaining slots to the other one.
    if pos > n_pos {
        neg += pos - n_pos;
        pos = n_pos;
    }
    if neg > n_neg {
        pos += neg - n_neg;
        neg = n_neg;
    }
    (pos.min(n_pos), neg.min(n_neg))
}

pub fn build_in_sample(corpus: &LabeledCorpus, plan: &SamplePlan) -> Result<CorpusSplit, DatasetError> {
    let f = plan.in_sample_fraction;
    if !(f > 0.0 && f <= 1.0) {
        return Err(DatasetError::BadFraction(f));
    }
    for label in GoldLabel::ALL {
        if corpus.count(label) == 0 {
            return Err(DatasetError::ClassMissing(label));
        }
    }
    let size = (f * corpus.len() as f64).round() as usize;
    if size < 2 {
        return Err(DatasetError::SampleTooSmall { size });
    }
    let (q_pos, q_neg) = class_quotas(
        size,
        corpus.count(GoldLabel::Positive),
        corpus.count(GoldLabel::Negative),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut chosen: BTreeSet<&str> = BTreeSet::new();
    for (label, quota) in [(GoldLabel::Positive, q_pos), (GoldLabel::Negative, q_neg)] {
        let pool: Vec<&LabeledRecord> = corpus.records().iter().filter(|r| r.label == label).collect();
        for idx in greedy_coverage(&pool, quota, plan.diversity_weight, &mut rng) {
            chosen.insert(pool[idx].id());
        }
    }

    Ok(CorpusSplit {
        in_sample: corpus.subset(&chosen),
        out_of_sample: LabeledCorpus::new(
            corpus
                .records()
                .iter()
                .filter(|r| !chosen.contains(r.id()))
                .cloned()
                .collect(),
        )?,
    })
}

/// Greedy maximum marginal vocabulary gain. Returns pool indices in pick order.
///
/// Each record gets one seeded tie-break key up front; equal scores fall back
/// to that key, then to ascending id.
fn greedy_coverage(pool: &[&LabeledRecord], quota: usize, diversity_weight: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut interned: HashMap<String, usize> = HashMap::new();
    let vocab: Vec<Vec<usize>> = pool
        .iter()
        .map(|r| {
            let mut ids: Vec<usize> = tokenize(r.transcript.text())
                .map(|t| {
                    let next = interned.len();
                    *interned.entry(t).or_insert(next)
                })
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect();
    let mut postings = vec![Vec::new(); interned.len()];
    for (i, toks) in vocab.iter().enumerate() {
        for &t in toks {
            postings[t].push(i);
        }
    }
    let tie_keys: Vec<u64> = pool.iter().map(|_| rng.random()).collect();
    let w = diversity_weight.clamp(0.0, 1.0);
    // Marginal gain of every record, kept current as tokens get covered.
    let mut gain: Vec<usize> = vocab.iter().map(Vec::len).collect();
    let mut covered = vec![false; interned.len()];
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut picks = Vec::with_capacity(quota);

    while picks.len() < quota && !remaining.is_empty() {
        let max_gain = remaining.iter().map(|&i| gain[i]).max().unwrap_or(0).max(1) as f64;
        let draws: Vec<f64> = if w < 1.0 {
            remaining.iter().map(|_| rng.random::<f64>()).collect()
        } else {
            Vec::new()
        };
        let score = |j: usize| -> f64 {
            let g = gain[remaining[j]] as f64;
            if w < 1.0 {
                w * g / max_gain + (1.0 - w) * draws[j]
            } else {
                g
            }
        };
        let best = (0..remaining.len())
            .min_by(|&a, &b| {
                score(b)
                    .total_cmp(&score(a))
                    .then(tie_keys[remaining[a]].cmp(&tie_keys[remaining[b]]))
                    .then(pool[remaining[a]].id().cmp(pool[remaining[b]].id()))
            })
            .expect("remaining is nonempty");
        let idx = remaining.remove(best);
        for &t in &vocab[idx] {
            if !std::mem::replace(&mut covered[t], true) {
                for &r in &postings[t] {
                    gain[r] -= 1;
                }
            }
        }
        picks.push(idx);
    }
    picks
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSet {
    pub partitions: Vec<Vec<String>>,
    pub k: usize,
    pub seed: u64,
}

/// Stratified `k`-way partition. Each class is shuffled with the seed and dealt
/// round-robin; the deal continues across classes so total sizes stay within 1.
pub fn partition_k(corpus: &LabeledCorpus, k: usize, seed: u64) -> Result<PartitionSet, DatasetError> {
    if k < 2 {
        return Err(DatasetError::BadPartitionCount(k));
    }
    let min_class = GoldLabel::ALL.iter().map(|&l| corpus.count(l)).min().unwrap_or(0);
    if k > min_class {
        return Err(DatasetError::PartitionInfeasible { k, min_class });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partitions = vec![Vec::new(); k];
    let mut slot = 0usize;
    for label in GoldLabel::ALL {
        let mut ids: Vec<&str> = corpus
            .records()
            .iter()
            .filter(|r| r.label == label)
            .map(LabeledRecord::id)
            .collect();
        ids.shuffle(&mut rng);
        for id in ids {
            partitions[slot % k].push(id.to_string());
            slot += 1;
        }
    }
    Ok(PartitionSet { partitions, k, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, text: &str, label: GoldLabel) -> LabeledRecord {
        LabeledRecord {
            transcript: Transcript::new(id, text).unwrap(),
            label,
        }
    }

    fn balanced(n_pos: usize, n_neg: usize) -> LabeledCorpus {
        let mut v = Vec::new();
        for i in 0..n_pos {
            v.push(rec(
                &format!("p{i:03}"),
                &format!("word{i} shared pos{i}"),
                GoldLabel::Positive,
            ));
        }
        for i in 0..n_neg {
            v.push(rec(
                &format!("n{i:03}"),
                &format!("word{i} shared neg{i}"),
                GoldLabel::Negative,
            ));
        }
        LabeledCorpus::new(v).unwrap()
    }

    #[test]
    fn load_jsonl_counts_classes() {
        let data = r#"{"id":"P01","text":"I feel tired","label":"positive"}
{"id":"P02","text":"Sleeping badly lately","label":"positive"}
{"id":"P03","text":"All good here","label":"negative"}
"#;
        let c = read_corpus(data.as_bytes(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.count(GoldLabel::Positive), 2);
        assert_eq!(c.count(GoldLabel::Negative), 1);
        assert_eq!(c.records()[1].id(), "P02");
    }

    #[test]
    fn load_rejects_duplicate_bad_label_and_empty() {
        let dup = "{\"id\":\"P01\",\"text\":\"a\",\"label\":\"positive\"}\n{\"id\":\"P01\",\"text\":\"b\",\"label\":\"negative\"}\n";
        assert!(matches!(
            read_corpus(dup.as_bytes(), CorpusFormat::Jsonl),
            Err(DatasetError::DuplicateId(id)) if id == "P01"
        ));
        let bad = "{\"id\":\"P01\",\"text\":\"a\",\"label\":\"maybe\"}\n";
        assert!(matches!(
            read_corpus(bad.as_bytes(), CorpusFormat::Jsonl),
            Err(DatasetError::BadLabel { line: 1, .. })
        ));
        let empty = "{\"id\":\"P01\",\"text\":\"   \",\"label\":\"negative\"}\n";
        assert!(matches!(
            read_corpus(empty.as_bytes(), CorpusFormat::Jsonl),
            Err(DatasetError::EmptyTranscript(_))
        ));
        let malformed = "{\"id\":\"P01\",\"text\":\"a\",\"label\":\"negative\"}\n{\"id\": 3\n";
        assert!(matches!(
            read_corpus(malformed.as_bytes(), CorpusFormat::Jsonl),
            Err(DatasetError::ParseError { line: 2, .. })
        ));
    }

    #[test]
    fn load_csv_with_quoting() {
        let data = "id,text,label\nA,\"hello, \"\"quoted\"\" world\",positive\nB,plain,negative\n";
        let c = read_corpus(data.as_bytes(), CorpusFormat::Csv).unwrap();
        assert_eq!(c.records()[0].transcript.text(), "hello, \"quoted\" world");
        assert_eq!(c.records()[0].transcript.token_count(), 3);
        let bad = "id,text,label\nA,x,positive\nB,y\n";
        assert!(matches!(
            read_corpus(bad.as_bytes(), CorpusFormat::Csv),
            Err(DatasetError::ParseError { line: 3, .. })
        ));
    }

    #[test]
    fn type_token_ratio() {
        assert_eq!(lexical_diversity("a b c").unwrap(), 1.0);
        assert_eq!(lexical_diversity("a a a a").unwrap(), 0.25);
        assert_eq!(lexical_diversity("The the THE cat").unwrap(), 0.5);
        assert_eq!(lexical_diversity("Well, well... well!").unwrap(), 1.0 / 3.0);
        assert!(matches!(
            lexical_diversity(" \t\n"),
            Err(DatasetError::EmptyTranscript(None))
        ));
    }

    #[test]
    fn balanced_half_split() {
        let c = balanced(8, 8);
        let plan = SamplePlan {
            in_sample_fraction: 0.5,
            ..SamplePlan::default()
        };
        let s = build_in_sample(&c, &plan).unwrap();
        assert_eq!(s.in_sample.count(GoldLabel::Positive), 4);
        assert_eq!(s.in_sample.count(GoldLabel::Negative), 4);
        assert_eq!(s.out_of_sample.len(), 8);
    }

    #[test]
    fn default_fraction_on_189() {
        let c = balanced(100, 89);
        let s = build_in_sample(&c, &SamplePlan::default()).unwrap();
        assert_eq!(s.in_sample.len(), 38);
        assert_eq!(s.in_sample.count(GoldLabel::Positive), 19);
        assert_eq!(s.in_sample.count(GoldLabel::Negative), 19);
        assert_eq!(s.out_of_sample.len(), 151);
    }

    #[test]
    fn odd_size_extra_slot_goes_to_larger_class() {
        assert_eq!(class_quotas(5, 10, 3), (3, 2));
        assert_eq!(class_quotas(5, 3, 10), (2, 3));
        assert_eq!(class_quotas(6, 1, 10), (1, 5));
    }

    #[test]
    fn greedy_picks_max_vocabulary_gain() {
        // Oracle: enumerate every 2-subset and keep the ones with maximal union vocabulary.
        let texts = ["a a", "a b", "c d", "a a a"];
        let mut best = 0;
        let mut best_sets = Vec::new();
        for i in 0..texts.len() {
            for j in i + 1..texts.len() {
                let v: BTreeSet<String> = tokenize(texts[i]).chain(tokenize(texts[j])).collect();
                if v.len() > best {
                    best = v.len();
                    best_sets.clear();
                }
                if v.len() == best {
                    best_sets.push(BTreeSet::from([texts[i], texts[j]]));
                }
            }
        }
        assert_eq!(best_sets, vec![BTreeSet::from(["a b", "c d"])]);

        let recs: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| rec(&format!("t{i}"), t, GoldLabel::Positive))
            .collect();
        let pool: Vec<&LabeledRecord> = recs.iter().collect();
        for seed in 0..16 {
            let picks = greedy_coverage(&pool, 2, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
            let got: BTreeSet<&str> = picks.iter().map(|&i| texts[i]).collect();
            assert_eq!(got, best_sets[0]);
        }
    }

    #[test]
    fn build_rejects_missing_class_and_tiny_sample() {
        let c = balanced(5, 0);
        assert!(matches!(
            build_in_sample(&c, &SamplePlan::default()),
            Err(DatasetError::ClassMissing(GoldLabel::Negative))
        ));
        let c = balanced(2, 2);
        assert!(matches!(
            build_in_sample(&c, &SamplePlan::default()),
            Err(DatasetError::SampleTooSmall { size: 1 })
        ));
    }

    #[test]
    fn stratified_partitions() {
        let c = balanced(6, 3);
        let p = partition_k(&c, 3, 11).unwrap();
        assert_eq!(p.partitions.len(), 3);
        for part in &p.partitions {
            assert_eq!(part.len(), 3);
            let pos = part.iter().filter(|id| id.starts_with('p')).count();
            assert_eq!(pos, 2);
        }
        assert_eq!(p, partition_k(&c, 3, 11).unwrap());
        assert!(matches!(
            partition_k(&c, c.len() + 1, 0),
            Err(DatasetError::PartitionInfeasible { .. })
        ));
        assert!(matches!(partition_k(&c, 1, 0), Err(DatasetError::BadPartitionCount(1))));
    }
}
