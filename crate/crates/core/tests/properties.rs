mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use promptscope::dataset::{
    build_in_sample, partition_k, GoldLabel, LabeledCorpus, LabeledRecord, SamplePlan, Transcript,
};
use promptscope::inference::Prediction;
use promptscope::metrics::{agreement_and_kappa, confusion, consistency, metric_set, robustness, MetricSet, SliceKind};
use promptscope::promptgen::{generate_catalog, render_prompt, CatalogConfig, PLACEHOLDER};
use promptscope::selection::{rank_prompts, recommend, MetricRow, SelectionCriteria};

use common::{records_for, recount};

fn gold() -> impl Strategy<Value = GoldLabel> {
    prop_oneof![Just(GoldLabel::Positive), Just(GoldLabel::Negative)]
}

fn prediction() -> impl Strategy<Value = Prediction> {
    prop_oneof![
        4 => Just(Prediction::Positive),
        4 => Just(Prediction::Negative),
        1 => Just(Prediction::Invalid),
    ]
}

fn pairs(max: usize) -> impl Strategy<Value = Vec<(GoldLabel, Prediction)>> {
    prop::collection::vec((gold(), prediction()), 1..=max)
}

fn metrics_of(pairs: &[(GoldLabel, Prediction)]) -> MetricSet {
    let (records, gold) = records_for("P", pairs);
    metric_set(&confusion(&records, &gold).unwrap()).unwrap()
}

fn corpus_from(labels: &[GoldLabel], words: &[Vec<u8>]) -> LabeledCorpus {
    let records = labels
        .iter()
        .zip(words)
        .enumerate()
        .map(|(i, (&label, w))| {
            let text: Vec<String> = w.iter().map(|x| format!("w{x}")).collect();
            LabeledRecord {
                transcript: Transcript::new(format!("r{i:03}"), text.join(" ")).unwrap(),
                label,
            }
        })
        .collect();
    LabeledCorpus::new(records).unwrap()
}

fn corpus_strategy(min: usize, max: usize) -> impl Strategy<Value = LabeledCorpus> {
    (min..=max)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(gold(), n),
                prop::collection::vec(prop::collection::vec(0u8..30, 1..8), n),
            )
        })
        .prop_filter("both classes present", |(labels, _)| {
            labels.contains(&GoldLabel::Positive) && labels.contains(&GoldLabel::Negative)
        })
        .prop_map(|(labels, words)| corpus_from(&labels, &words))
}

fn metric_row() -> impl Strategy<Value = MetricRow> {
    (0u32..40, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..0.3).prop_map(|(id, p, r, s)| {
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        MetricRow {
            prompt_id: format!("DI-{id}"),
            metrics: MetricSet {
                accuracy: 0.5,
                precision: p,
                recall: r,
                f1,
                macro_f1: f1,
                bias: (p - r).abs(),
            },
            sigma_f1: s,
        }
    })
}

fn unique_rows() -> impl Strategy<Value = Vec<MetricRow>> {
    prop::collection::vec(metric_row(), 1..12).prop_map(|rows| {
        let mut seen = BTreeSet::new();
        rows.into_iter().filter(|r| seen.insert(r.prompt_id.clone())).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn confusion_metrics_match_brute_force(pairs in pairs(200)) {
        let m = metrics_of(&pairs);
        let o = recount(&pairs);
        prop_assert!((m.accuracy - o.accuracy).abs() <= 1e-12);
        prop_assert!((m.precision - o.precision).abs() <= 1e-12);
        prop_assert!((m.recall - o.recall).abs() <= 1e-12);
        prop_assert!((m.f1 - o.f1).abs() <= 1e-12);
        prop_assert!((m.macro_f1 - o.macro_f1).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn invalidating_a_correct_record_never_helps(pairs in pairs(120), pick in any::<prop::sample::Index>()) {
        let correct: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].1.label() == Some(pairs[i].0)).collect();
        prop_assume!(!correct.is_empty());
        let i = correct[pick.index(correct.len())];
        let before = metrics_of(&pairs);
        let mut mutated = pairs.clone();
        mutated[i].1 = Prediction::Invalid;
        let after = metrics_of(&mutated);
        prop_assert!(after.precision <= before.precision + 1e-12);
        prop_assert!(after.recall <= before.recall + 1e-12);
        prop_assert!(after.f1 <= before.f1 + 1e-12);
        prop_assert!(after.accuracy <= before.accuracy + 1e-12);
    }

    #[test]
    fn invalidating_any_parsed_record_never_helps(pairs in pairs(120), pick in any::<prop::sample::Index>()) {
        let i = pick.index(pairs.len());
        prop_assume!(pairs[i].1 != Prediction::Invalid);
        let before = metrics_of(&pairs);
        let mut mutated = pairs.clone();
        mutated[i].1 = Prediction::Invalid;
        let after = metrics_of(&mutated);
        prop_assert!(after.precision <= before.precision + 1e-12 || pairs[i].0 == GoldLabel::Negative);
        prop_assert!(after.recall <= before.recall + 1e-12);
        prop_assert!(after.accuracy <= before.accuracy + 1e-12);
    }

    #[test]
    fn metrics_invariant_under_record_order(pairs in pairs(80), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(metrics_of(&pairs), metrics_of(&shuffled));
    }

    #[test]
    fn kappa_and_agreement_are_symmetric(
        ab in prop::collection::vec((prediction(), prediction()), 1..100)
    ) {
        let (a, b): (Vec<Prediction>, Vec<Prediction>) = ab.into_iter().unzip();
        let (po_ab, k_ab) = agreement_and_kappa(&a, &b);
        let (po_ba, k_ba) = agreement_and_kappa(&b, &a);
        prop_assert_eq!(po_ab, po_ba);
        prop_assert!((k_ab - k_ba).abs() <= 1e-12);
        prop_assert!(k_ab <= 1.0 + 1e-12);
        let (po_aa, k_aa) = agreement_and_kappa(&a, &a);
        prop_assert_eq!(po_aa, 1.0);
        prop_assert_eq!(k_aa, 1.0);
    }

    #[test]
    fn consistency_matrices_are_symmetric(
        preds in prop::collection::vec(prop::collection::vec(prediction(), 6), 2..5)
    ) {
        let mut by_prompt = BTreeMap::new();
        for (p, row) in preds.iter().enumerate() {
            let m: BTreeMap<String, Prediction> = row.iter().enumerate().map(|(i, &x)| (format!("t{i}"), x)).collect();
            by_prompt.insert(format!("P{p}"), m);
        }
        let report = consistency(&by_prompt).unwrap();
        let n = report.prompts.len();
        for i in 0..n {
            prop_assert_eq!(report.agreement[i][i], 1.0);
            for j in 0..n {
                prop_assert_eq!(report.agreement[i][j], report.agreement[j][i]);
                prop_assert_eq!(report.kappa[i][j], report.kappa[j][i]);
            }
        }
    }

    #[test]
    fn sigma_scales_and_ignores_shifts(xs in prop::collection::vec(0.0f64..1.0, 2..12), c in 0.1f64..5.0, d in -1.0f64..1.0) {
        let base = robustness(&xs, SliceKind::Partition).unwrap().sigma_f1;
        let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
        let shifted: Vec<f64> = xs.iter().map(|x| x + d).collect();
        prop_assert!((robustness(&scaled, SliceKind::Partition).unwrap().sigma_f1 - c * base).abs() <= 1e-9);
        prop_assert!((robustness(&shifted, SliceKind::Partition).unwrap().sigma_f1 - base).abs() <= 1e-9);
    }

    #[test]
    fn split_is_disjoint_covering_and_balanced(corpus in corpus_strategy(4, 60), seed in any::<u64>(), w in 0.0f64..=1.0) {
        let plan = SamplePlan { in_sample_fraction: 0.2, seed, diversity_weight: w };
        prop_assume!((0.2 * corpus.len() as f64).round() >= 2.0);
        let split = build_in_sample(&corpus, &plan).unwrap();
        let is: BTreeSet<&str> = split.in_sample.ids().collect();
        let oos: BTreeSet<&str> = split.out_of_sample.ids().collect();
        let all: BTreeSet<&str> = corpus.ids().collect();
        prop_assert!(is.is_disjoint(&oos));
        prop_assert_eq!(is.union(&oos).copied().collect::<BTreeSet<_>>(), all);
        prop_assert_eq!(is.len(), (0.2 * corpus.len() as f64).round() as usize);
        let pos = split.in_sample.count(GoldLabel::Positive);
        let neg = split.in_sample.count(GoldLabel::Negative);
        let short_class = pos == corpus.count(GoldLabel::Positive) || neg == corpus.count(GoldLabel::Negative);
        prop_assert!(pos.abs_diff(neg) <= 1 || short_class);
        prop_assert_eq!(build_in_sample(&corpus, &plan).unwrap(), split);
    }

    #[test]
    fn partitions_cover_and_stratify(corpus in corpus_strategy(6, 60), k in 2usize..5, seed in any::<u64>()) {
        let min_class = corpus.count(GoldLabel::Positive).min(corpus.count(GoldLabel::Negative));
        prop_assume!(k <= min_class);
        let set = partition_k(&corpus, k, seed).unwrap();
        let gold = corpus.gold();
        let mut seen = BTreeSet::new();
        for part in &set.partitions {
            for id in part {
                prop_assert!(seen.insert(id.clone()));
            }
            prop_assert!(part.iter().any(|id| gold[id] == GoldLabel::Positive));
        }
        prop_assert_eq!(seen.len(), corpus.len());
        let sizes: Vec<usize> = set.partitions.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn choice_ignores_row_order(rows in unique_rows(), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let criteria = SelectionCriteria::default();
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = rank_prompts(&rows, &criteria).unwrap();
        let b = rank_prompts(&shuffled, &criteria).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(
            recommend(&a, &criteria, 3).unwrap().chosen.prompt_id,
            recommend(&b, &criteria, 3).unwrap().chosen.prompt_id
        );
    }

    #[test]
    fn loosening_thresholds_never_shrinks_eligibility(rows in unique_rows(), bias in 0.0f64..1.0, extra in 0.0f64..0.5) {
        let tight = SelectionCriteria { bias_max: bias, ..SelectionCriteria::default() };
        let loose = SelectionCriteria { bias_max: (bias + extra).min(1.0), ..SelectionCriteria::default() };
        let eligible = |c: &SelectionCriteria| -> BTreeSet<String> {
            rank_prompts(&rows, c).unwrap().into_iter().filter(|r| r.eligible).map(|r| r.prompt_id).collect()
        };
        prop_assert!(eligible(&tight).is_subset(&eligible(&loose)));
    }

    #[test]
    fn rendering_is_injective(a in "[a-z ]{1,40}", b in "[a-z ]{1,40}") {
        prop_assume!(a.trim() != b.trim() && !a.trim().is_empty() && !b.trim().is_empty());
        let catalog = generate_catalog(&CatalogConfig::default()).unwrap();
        let ta = Transcript::new("a", a.trim()).unwrap();
        let tb = Transcript::new("b", b.trim()).unwrap();
        for v in &catalog.variants {
            let ra = render_prompt(v, &ta).unwrap();
            prop_assert!(!ra.contains(PLACEHOLDER));
            prop_assert!(ra.contains(ta.text()));
            prop_assert_ne!(ra, render_prompt(v, &tb).unwrap());
        }
    }
}
