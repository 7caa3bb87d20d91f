use proptest::prelude::*;
use sric_core::augment::match_pseudo_hashtag;
use sric_core::corpus::{
    clean_text, partition, shipped_lexicon, HashtagEntry, Lexicon, Polarity, Post, SentimentLabel,
};
use sric_core::eval::{confusion_matrix, kfold_split, weighted_metrics, TfIdf};
use sric_core::model::{argmax, cosine_distance, mean_signed_distance, softmax};
use sric_core::relation::{derive_relation, RelationLabel};
use sric_core::segment::{segment_body, FrequencyTable};

fn label() -> impl Strategy<Value = SentimentLabel> {
    (0usize..3).prop_map(|i| SentimentLabel::from_index(i).unwrap())
}

fn text_piece() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z]{1,8}",
        "#[a-z0-9]{1,10}",
        "@[a-z_]{1,6}",
        "https?://[a-z./]{1,10}",
        "[0-9]{1,4}",
        "[!?.,;:'\"()]{1,3}",
        Just("\u{1F600}".to_string()),
        Just("Ǆ".to_string()),
        Just("İ".to_string()),
        "[ \t\n]{1,3}",
    ]
}

fn raw_text() -> impl Strategy<Value = String> {
    prop::collection::vec(text_piece(), 0..12).prop_map(|v| v.join(" "))
}

/// Reference weighted metrics computed straight from label lists.
fn brute_force(y: &[usize], p: &[usize]) -> (f64, f64, f64, f64) {
    let n = y.len() as f64;
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for c in 0..3 {
        let tp = y.iter().zip(p).filter(|(a, b)| **a == c && **b == c).count() as f64;
        let support = y.iter().filter(|a| **a == c).count() as f64;
        let predicted = p.iter().filter(|b| **b == c).count() as f64;
        let prec = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let rec = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        wp += support / n * prec;
        wr += support / n * rec;
        wf += support / n * f1;
    }
    let acc = y.iter().zip(p).filter(|(a, b)| a == b).count() as f64 / n;
    (acc, wp, wr, wf)
}

fn brute_force_segment(body: &str, freq: &FrequencyTable) -> String {
    let chars: Vec<char> = body.chars().collect();
    let n = chars.len();
    let mut best: Option<(f64, usize, String)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut words = Vec::new();
        let mut start = 0;
        for i in 1..=n {
            if i == n || mask & (1 << (i - 1)) != 0 {
                words.push(chars[start..i].iter().collect::<String>());
                start = i;
            }
        }
        let score = words.iter().fold(0.0, |acc, w| acc + freq.log_prob(w));
        let joined = words.join(" ");
        let better = match &best {
            None => true,
            Some((s, k, j)) => {
                score > *s || (score == *s && (words.len() < *k || (words.len() == *k && joined < *j)))
            }
        };
        if better {
            best = Some((score, words.len(), joined));
        }
    }
    best.unwrap().2
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn clean_text_is_idempotent(raw in raw_text()) {
        let once = clean_text(&raw);
        prop_assert_eq!(clean_text(&once), once.clone());
        prop_assert!(!once.contains("http"));
        prop_assert!(!once.contains('@'));
    }

    #[test]
    fn partition_is_a_bijection(texts in prop::collection::vec((raw_text(), label(), any::<bool>()), 0..30)) {
        let lex = shipped_lexicon();
        let posts: Vec<Post> = texts
            .iter()
            .enumerate()
            .map(|(i, (t, l, tag))| {
                let t = if *tag { format!("{t} #stopthehate") } else { t.clone() };
                Post::new(format!("p{i}"), t, *l)
            })
            .collect();
        let part = partition(&posts, &lex);
        prop_assert_eq!(part.with_hashtags.len() + part.without_hashtags.len(), posts.len());
        let mut ids: Vec<&str> = part.with_hashtags.iter().chain(&part.without_hashtags).map(|p| p.id.as_str()).collect();
        ids.sort_unstable();
        let mut expected: Vec<&str> = posts.iter().map(|p| p.id.as_str()).collect();
        expected.sort_unstable();
        prop_assert_eq!(ids, expected);
        for (p, (_, _, tag)) in posts.iter().zip(&texts) {
            if *tag {
                prop_assert!(part.with_hashtags.iter().any(|q| q.id == p.id));
            }
        }
    }

    #[test]
    fn dp_matches_exhaustive_split(body in "[a-z]{1,12}") {
        let freq = FrequencyTable::shipped();
        prop_assert_eq!(segment_body(&body, &freq).join(" "), brute_force_segment(&body, &freq));
    }

    #[test]
    fn segmentation_spells_its_input(body in "[a-z0-9]{1,30}") {
        let freq = FrequencyTable::shipped();
        let words = segment_body(&body, &freq);
        prop_assert_eq!(words.concat(), body);
        prop_assert!(words.iter().all(|w| !w.is_empty()));
    }

    #[test]
    fn metrics_match_brute_force(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..50)) {
        let y: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let p: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let to = |v: &[usize]| v.iter().map(|&i| SentimentLabel::from_index(i).unwrap()).collect::<Vec<_>>();
        let r = weighted_metrics(&to(&y), &to(&p)).unwrap();
        let (acc, wp, wr, wf) = brute_force(&y, &p);
        prop_assert!((r.accuracy - acc).abs() <= 1e-12);
        prop_assert!((r.weighted_precision - wp).abs() <= 1e-12);
        prop_assert!((r.weighted_recall - wr).abs() <= 1e-12);
        prop_assert!((r.weighted_f1 - wf).abs() <= 1e-12);
        prop_assert!((r.accuracy - r.weighted_recall).abs() <= 1e-12);
        let m = confusion_matrix(&to(&y), &to(&p)).unwrap();
        prop_assert_eq!(m.iter().flatten().sum::<usize>(), y.len());
        for (c, row) in m.iter().enumerate() {
            prop_assert_eq!(row.iter().sum::<usize>(), y.iter().filter(|&&t| t == c).count());
        }
        for v in [r.accuracy, r.weighted_precision, r.weighted_recall, r.weighted_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant(
        logits in prop::collection::vec(-50.0f64..50.0, 3),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax(&logits).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|x| *x > 0.0));
        let shifted: Vec<f64> = logits.iter().map(|x| x + shift).collect();
        prop_assert_eq!(argmax(&softmax(&shifted).unwrap()), argmax(&p));
    }

    #[test]
    fn cosine_distance_in_range(
        a in prop::collection::vec(-10.0f64..10.0, 8),
        b in prop::collection::vec(-10.0f64..10.0, 8),
    ) {
        prop_assume!(a.iter().any(|x| *x != 0.0) && b.iter().any(|x| *x != 0.0));
        let d = cosine_distance(&a, &b).unwrap();
        prop_assert!((0.0..=2.0).contains(&d));
    }

    #[test]
    fn signed_distance_is_monotone(d in 0.0f64..2.0, delta in 0.0f64..1.0, others in prop::collection::vec((0usize..3, 0.0f64..2.0), 0..5)) {
        let rest: Vec<(RelationLabel, f64)> = others.iter().map(|(r, x)| (RelationLabel::from_index(*r).unwrap(), *x)).collect();
        let with = |r: RelationLabel, x: f64| {
            let mut v = rest.clone();
            v.push((r, x));
            mean_signed_distance(&v).unwrap()
        };
        let closer = (d - delta).max(0.0);
        let farther = (d + delta).min(2.0);
        prop_assert!(with(RelationLabel::Entailment, closer) <= with(RelationLabel::Entailment, d));
        prop_assert!(with(RelationLabel::Contradiction, farther) <= with(RelationLabel::Contradiction, d));
        let l = with(RelationLabel::Neutral, d);
        prop_assert!((-2.0..=2.0).contains(&l));
    }

    #[test]
    fn matching_is_scale_invariant(
        z in prop::collection::vec(-1.0f64..1.0, 4),
        hs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..6),
        exp in -8i32..8,
    ) {
        prop_assume!(z.iter().any(|x| x.abs() > 1e-3));
        prop_assume!(hs.iter().all(|h| h.iter().any(|x| x.abs() > 1e-3)));
        let s = 2f64.powi(exp);
        let refs: Vec<&[f64]> = hs.iter().map(|h| h.as_slice()).collect();
        let scaled: Vec<Vec<f64>> = hs.iter().map(|h| h.iter().map(|x| x * s).collect()).collect();
        let scaled_refs: Vec<&[f64]> = scaled.iter().map(|h| h.as_slice()).collect();
        let zs: Vec<f64> = z.iter().map(|x| x * s).collect();
        prop_assert_eq!(
            match_pseudo_hashtag(&z, &refs).unwrap().0,
            match_pseudo_hashtag(&zs, &scaled_refs).unwrap().0
        );
    }

    #[test]
    fn kfold_test_sets_partition(labels in prop::collection::vec(label(), 5..80), seed in any::<u64>()) {
        let plan = kfold_split(&labels, 5, 0.2, seed).unwrap();
        let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for f in &plan.folds {
            prop_assert!(f.validation.iter().all(|i| !f.test.contains(i)));
            prop_assert!(f.train.iter().all(|i| !f.test.contains(i) && !f.validation.contains(i)));
        }
    }

    #[test]
    fn unseen_terms_have_zero_weight(docs in prop::collection::vec("[a-e]{1,3}( [a-e]{1,3}){0,4}", 1..8), unseen in "[x-z]{2,4}") {
        let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
        let m = TfIdf::fit(&refs).unwrap();
        prop_assert!(m.transform(&unseen).is_empty());
        let row = m.transform(&format!("{} {unseen}", docs[0]));
        prop_assert_eq!(row, m.transform(&docs[0]));
    }

    #[test]
    fn hate_only_lexicon_maps_labels_through_table(labels in prop::collection::vec(label(), 0..40)) {
        let lex = shipped_lexicon().filter_polarity(Polarity::Hate);
        let entry: &HashtagEntry = &lex.entries()[0];
        for l in &labels {
            let expected = match l {
                SentimentLabel::Hate => RelationLabel::Entailment,
                SentimentLabel::CounterHate => RelationLabel::Contradiction,
                SentimentLabel::Neutral => RelationLabel::Neutral,
            };
            prop_assert_eq!(derive_relation(entry.polarity, *l), expected);
        }
    }
}

#[test]
fn lexicon_surfaces_round_trip() {
    let lex: Lexicon = shipped_lexicon();
    for e in lex.entries() {
        assert_eq!(e.segmented.replace(' ', ""), e.body());
    }
}
