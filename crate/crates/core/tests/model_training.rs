use sric_core::corpus::{generate_with, HashtagMode, SentimentLabel, SynthOptions};
use sric_core::encoder::{BackendBuilder, EncoderBackend, ToyEncoder, ToyEncoderConfig};
use sric_core::model::{
    batch_objective, predict_text, train, LossWeights, ModelState, PairInput, TrainConfig,
    TrainExample,
};
use sric_core::relation::RelationLabel;

fn toy_state(texts: &[&str], dim: usize, seed: u64) -> ModelState<ToyEncoder> {
    let config = ToyEncoderConfig {
        dim,
        max_len: 24,
        init_noise: 0.3,
    };
    ModelState::new(config.build(texts, seed), 0.0, seed + 1)
}

fn eight_samples() -> Vec<TrainExample> {
    let rows = [
        ("the virus came from china", SentimentLabel::Hate, Some(("virus came from", "china virus", RelationLabel::Entailment))),
        ("stop the hate now", SentimentLabel::CounterHate, Some(("now", "stop the hate", RelationLabel::Entailment))),
        ("racism is a virus too", SentimentLabel::CounterHate, Some(("too", "china virus", RelationLabel::Contradiction))),
        ("wash your hands", SentimentLabel::Neutral, Some(("wash your hands", "stop the hate", RelationLabel::Neutral))),
        ("china must pay", SentimentLabel::Hate, Some(("must", "racism is a virus", RelationLabel::Contradiction))),
        ("cases rising in the city", SentimentLabel::Neutral, None),
        ("kung flu spreading", SentimentLabel::Hate, None),
        ("we stand together", SentimentLabel::CounterHate, Some(("we stand together", "stop the hate", RelationLabel::Entailment))),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, (text, label, pair))| TrainExample {
            id: format!("p{i}"),
            text: text.to_string(),
            label: *label,
            pair: pair.map(|(c, h, r)| PairInput {
                t_c: c.to_string(),
                t_h: h.to_string(),
                relation: r,
            }),
        })
        .collect()
}

fn perturbed_total(
    state: &ModelState<ToyEncoder>,
    batch: &[TrainExample],
    w: &LossWeights,
    tensor: usize,
    index: usize,
    delta: f64,
) -> f64 {
    let mut s = state.clone();
    s.parameters_mut()[tensor][index] += delta;
    batch_objective(&s, batch, w).unwrap().0.total(w)
}

#[test]
fn combined_objective_gradient_matches_finite_differences() {
    let batch = eight_samples();
    let mut texts: Vec<&str> = batch.iter().map(|e| e.text.as_str()).collect();
    for e in &batch {
        if let Some(p) = &e.pair {
            texts.push(&p.t_c);
            texts.push(&p.t_h);
        }
    }
    let state = toy_state(&texts, 6, 11);
    let weights = LossWeights::new(2.0, 3.0, 1.5);
    let (_, grads) = batch_objective(&state, &batch, &weights).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let params = state.parameters();
    assert_eq!(grads.len(), params.len());
    for (t, p) in params.iter().enumerate() {
        for i in 0..p.len() {
            let numeric = (perturbed_total(&state, &batch, &weights, t, i, h)
                - perturbed_total(&state, &batch, &weights, t, i, -h))
                / (2.0 * h);
            let analytic = grads[t][i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

#[test]
fn zero_pair_weights_leave_relation_head_untouched() {
    let batch = eight_samples();
    let texts: Vec<&str> = batch.iter().map(|e| e.text.as_str()).collect();
    let state = toy_state(&texts, 6, 2);
    let (_, grads) = batch_objective(&state, &batch, &LossWeights::sentiment_only()).unwrap();
    let rel = grads.last().unwrap();
    assert!(rel.iter().all(|g| *g == 0.0));
}

fn separable_examples(seed: u64) -> (Vec<TrainExample>, Vec<TrainExample>) {
    let opts = SynthOptions {
        implicit_rate: 0.0,
        ..SynthOptions::new(seed, 50, 0.5)
    };
    let (posts, lexicon) = generate_with(&opts);
    let examples: Vec<TrainExample> = posts
        .iter()
        .map(|p| TrainExample::from_post(p, &lexicon, HashtagMode::Segmented, true))
        .collect();
    let val = examples.iter().step_by(5).cloned().collect();
    (examples, val)
}

#[test]
fn separable_corpus_trains_to_high_accuracy() {
    let (train_set, val) = separable_examples(7);
    let texts: Vec<&str> = train_set.iter().map(|e| e.text.as_str()).collect();
    let config = ToyEncoderConfig::default();
    let state = ModelState::new(config.build(&texts, 1), 0.2, 2);
    let tc = TrainConfig {
        max_epochs: 50,
        seed: 3,
        ..TrainConfig::default()
    };
    let (trained, history) = train(state, &train_set, &val, &tc).unwrap();
    assert!(history.epochs.len() <= 50);
    let correct = train_set
        .iter()
        .filter(|e| predict_text(&trained, &e.text).unwrap() == e.label)
        .count();
    let acc = correct as f64 / train_set.len() as f64;
    assert!(acc >= 0.95, "training accuracy {acc}");
}

#[test]
fn same_seed_gives_identical_history() {
    let (train_set, val) = separable_examples(9);
    let texts: Vec<&str> = train_set.iter().map(|e| e.text.as_str()).collect();
    let config = ToyEncoderConfig {
        dim: 16,
        ..Default::default()
    };
    let tc = TrainConfig {
        max_epochs: 4,
        seed: 5,
        ..TrainConfig::default()
    };
    let run = || {
        let state = ModelState::new(config.build(&texts, 1), 0.2, 2);
        train(state, &train_set, &val, &tc).unwrap()
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(ha, hb);
    assert!(a == b);
    assert_eq!(ha.to_jsonl().lines().count(), ha.epochs.len());
}

#[test]
fn history_respects_patience_rule() {
    let (train_set, val) = separable_examples(4);
    let texts: Vec<&str> = train_set.iter().map(|e| e.text.as_str()).collect();
    let config = ToyEncoderConfig {
        dim: 8,
        ..Default::default()
    };
    let tc = TrainConfig {
        max_epochs: 30,
        patience: 2,
        learning_rate: 0.05,
        seed: 1,
        ..TrainConfig::default()
    };
    let state = ModelState::new(config.build(&texts, 1), 0.0, 2);
    let (_, h) = train(state, &train_set, &val, &tc).unwrap();
    let best = h
        .epochs
        .iter()
        .min_by(|a, b| a.validation_total.total_cmp(&b.validation_total))
        .unwrap();
    assert_eq!(best.epoch, h.best_epoch);
    if h.early_stopped {
        assert_eq!(h.stopped_epoch, h.best_epoch + 2);
    } else {
        assert_eq!(h.stopped_epoch, 30);
    }
}

#[test]
fn encoder_dimension_is_respected() {
    let s = toy_state(&["a b"], 5, 0);
    assert_eq!(s.encoder.encode("a b").len(), 5);
}
