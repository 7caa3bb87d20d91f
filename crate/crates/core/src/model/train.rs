//! Joint training loop: AdamW on the weighted sum of the three losses,
//! validation after every epoch, early stopping with best-state restore.

use ndarray::ArrayView1;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{cosine_distance, cosine_distance_grad, softmax, LossParts, LossWeights, ModelState};
use crate::corpus::{render_text, split_post, HashtagMode, Lexicon, PairSample, Post, SentimentLabel};
use crate::encoder::{zero_gradients, BackendBuilder, EncoderBackend, Gradients};
use crate::error::{Error, Result};
use crate::relation::RelationLabel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInput {
    pub t_c: String,
    pub t_h: String,
    pub relation: RelationLabel,
}

/// A post as the trainer sees it: the text fed to the sentiment head and,
/// for posts with a (pseudo-)hashtag, the relation pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainExample {
    pub id: String,
    pub text: String,
    pub label: SentimentLabel,
    pub pair: Option<PairInput>,
}

impl From<&PairSample> for PairInput {
    fn from(p: &PairSample) -> Self {
        Self {
            t_c: p.t_c.clone(),
            t_h: p.t_h.clone(),
            relation: p.relation,
        }
    }
}

impl TrainExample {
    /// The sentiment text is rendered with `mode`; the pair, when wanted,
    /// comes from the post's first sentiment hashtag.
    pub fn from_post(post: &Post, lexicon: &Lexicon, mode: HashtagMode, with_pair: bool) -> Self {
        let pair = if with_pair {
            split_post(post, lexicon).as_ref().map(PairInput::from)
        } else {
            None
        };
        Self {
            id: post.id.clone(),
            text: render_text(post, lexicon, mode),
            label: post.label,
            pair,
        }
    }
}

/// Every string the encoder will see for these examples.
pub fn example_texts<'a>(sets: &[&'a [TrainExample]]) -> Vec<&'a str> {
    let mut out = Vec::new();
    for ex in sets.iter().flat_map(|s| s.iter()) {
        out.push(ex.text.as_str());
        if let Some(p) = &ex.pair {
            out.push(p.t_c.as_str());
            out.push(p.t_h.as_str());
        }
    }
    out
}

/// A freshly initialised model whose backend is built over `sets`.
pub fn fresh_state<Bd: BackendBuilder>(
    builder: &Bd,
    sets: &[&[TrainExample]],
    dropout: f64,
    seed: u64,
) -> ModelState<Bd::Backend> {
    let encoder = builder.build(&example_texts(sets), seed);
    ModelState::new(encoder, dropout, seed.wrapping_add(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub loss_weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 0.01,
            batch_size: 16,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            loss_weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.patience < 1 {
            return Err(Error::config("patience", "must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.max_epochs < 1 {
            return Err(Error::config("max_epochs", "must be at least 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay", "must be non-negative"));
        }
        self.loss_weights
            .validate()
            .map_err(|e| Error::config("loss_weights", e.to_string()))
    }
}

/// Decoupled-weight-decay Adam.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl AdamW {
    pub fn new(params: &[&[f64]], learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: zero_gradients(params),
            v: zero_gradients(params),
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (k, p) in params.into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..p.len() {
                p[i] -= self.learning_rate * self.weight_decay * p[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once the monitored loss has failed to improve for `patience`
/// consecutive epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: LossParts,
    pub train_total: f64,
    pub validation: LossParts,
    pub validation_total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub early_stopped: bool,
}

impl TrainHistory {
    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e).expect("epoch record serializes"));
            out.push('\n');
        }
        out
    }
}

fn dropout_mask(rng: Option<&mut ChaCha8Rng>, rate: f64, dim: usize) -> Option<Vec<f64>> {
    let rng = rng?;
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    Some((0..dim).map(|_| if rng.gen_bool(rate) { 0.0 } else { keep }).collect())
}

/// Softmax-head cross-entropy for one pooled vector. Returns the loss and
/// accumulates gradients (scaled by `scale`) into the head and encoder.
#[allow(clippy::too_many_arguments)]
fn head_step<B: EncoderBackend>(
    state: &ModelState<B>,
    head: &ndarray::Array2<f64>,
    head_grad: &mut [f64],
    encoder_grads: &mut [Vec<f64>],
    pooled: &[f64],
    trace: &B::Trace,
    mask: Option<&[f64]>,
    target: usize,
    scale: f64,
    want_grads: bool,
) -> Result<f64> {
    let input: Vec<f64> = match mask {
        Some(m) => pooled.iter().zip(m).map(|(z, k)| z * k).collect(),
        None => pooled.to_vec(),
    };
    let logits = head.dot(&ArrayView1::from(&input[..]));
    let probs = softmax(logits.as_slice().expect("contiguous"))?;
    let loss = -probs[target].ln();
    if want_grads && scale != 0.0 {
        let d = input.len();
        let g: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(k, p)| scale * (p - f64::from(u8::from(k == target))))
            .collect();
        let mut d_input = vec![0.0; d];
        for (k, gk) in g.iter().enumerate() {
            let row = &mut head_grad[k * d..(k + 1) * d];
            for i in 0..d {
                row[i] += gk * input[i];
                d_input[i] += gk * head[[k, i]];
            }
        }
        if let Some(m) = mask {
            for (x, k) in d_input.iter_mut().zip(m) {
                *x *= k;
            }
        }
        state.encoder.backward(trace, &d_input, encoder_grads);
    }
    Ok(loss)
}

fn objective<B: EncoderBackend>(
    state: &ModelState<B>,
    batch: &[TrainExample],
    weights: &LossWeights,
    mut rng: Option<&mut ChaCha8Rng>,
    want_grads: bool,
) -> Result<(LossParts, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut grads = if want_grads {
        zero_gradients(&state.parameters())
    } else {
        Vec::new()
    };
    let n_enc = state.encoder.parameters().len();
    let d = state.dim();
    let n = batch.len() as f64;
    let n_pairs = batch.iter().filter(|e| e.pair.is_some()).count();
    let mut parts = LossParts::default();

    // Split the gradient buffers into encoder / sentiment head / relation head.
    let (enc_grads, head_grads): (&mut [Vec<f64>], &mut [Vec<f64>]) = if want_grads {
        grads.split_at_mut(n_enc)
    } else {
        (&mut [], &mut [])
    };
    let mut empty_a: Vec<f64> = Vec::new();
    let mut empty_b: Vec<f64> = Vec::new();
    let (sent_grad, rel_grad) = match head_grads {
        [a, b] => (a, b),
        _ => (&mut empty_a, &mut empty_b),
    };

    for ex in batch {
        let seq = state.encoder.tokenize(&ex.text);
        let (z_c, trace) = state.encoder.forward(&seq);
        let mask = dropout_mask(rng.as_deref_mut(), state.dropout, d);
        parts.sentiment += head_step(
            state,
            &state.sentiment_head,
            sent_grad,
            enc_grads,
            &z_c,
            &trace,
            mask.as_deref(),
            ex.label.index(),
            weights.alpha / n,
            want_grads,
        )?;
    }
    parts.sentiment /= n;

    if n_pairs > 0 {
        let np = n_pairs as f64;
        for pair in batch.iter().filter_map(|e| e.pair.as_ref()) {
            let seq = state.encoder.tokenize_pair(&pair.t_c, &pair.t_h);
            let (z_r, trace) = state.encoder.forward(&seq);
            let mask = dropout_mask(rng.as_deref_mut(), state.dropout, d);
            parts.inference += head_step(
                state,
                &state.relation_head,
                rel_grad,
                enc_grads,
                &z_r,
                &trace,
                mask.as_deref(),
                pair.relation.index(),
                weights.beta / np,
                want_grads,
            )?;

            let (z, trace_c) = state.encoder.forward(&state.encoder.tokenize(&pair.t_c));
            let (psi, trace_h) = state.encoder.forward(&state.encoder.tokenize(&pair.t_h));
            let sign = f64::from(pair.relation.indicator());
            parts.distance += sign * cosine_distance(&z, &psi)?;
            let scale = weights.gamma * sign / np;
            if want_grads && scale != 0.0 {
                let (dz, dpsi) = cosine_distance_grad(&z, &psi)?;
                let dz: Vec<f64> = dz.into_iter().map(|g| g * scale).collect();
                let dpsi: Vec<f64> = dpsi.into_iter().map(|g| g * scale).collect();
                state.encoder.backward(&trace_c, &dz, enc_grads);
                state.encoder.backward(&trace_h, &dpsi, enc_grads);
            }
        }
        parts.inference /= np;
        parts.distance /= np;
    }
    Ok((parts, grads))
}

/// Loss components and their gradient (aligned with
/// `ModelState::parameters`) on one batch, without dropout.
pub fn batch_objective<B: EncoderBackend>(
    state: &ModelState<B>,
    batch: &[TrainExample],
    weights: &LossWeights,
) -> Result<(LossParts, Gradients)> {
    objective(state, batch, weights, None, true)
}

/// Loss components over a whole example set, without dropout.
pub fn evaluate_loss<B: EncoderBackend>(
    state: &ModelState<B>,
    examples: &[TrainExample],
    weights: &LossWeights,
) -> Result<LossParts> {
    Ok(objective(state, examples, weights, None, false)?.0)
}

/// Train until validation loss stalls for `patience` epochs (or
/// `max_epochs`), returning the best-validation state.
pub fn train<B: EncoderBackend>(
    mut state: ModelState<B>,
    train_set: &[TrainExample],
    val_set: &[TrainExample],
    config: &TrainConfig,
) -> Result<(ModelState<B>, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let weights = config.loss_weights;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = AdamW::new(&state.parameters(), config.learning_rate, config.weight_decay);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = state.clone();
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut acc = LossParts::default();
        let mut acc_pairs = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<TrainExample> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (parts, grads) = objective(&state, &batch, &weights, Some(&mut rng), true)?;
            step += 1;
            let total = parts.total(&weights);
            if !total.is_finite() {
                return Err(Error::Diverged { epoch, step, loss: total });
            }
            optimizer.step(state.parameters_mut(), &grads);
            let pairs = batch.iter().filter(|e| e.pair.is_some()).count();
            acc.sentiment += parts.sentiment * batch.len() as f64;
            acc.inference += parts.inference * pairs as f64;
            acc.distance += parts.distance * pairs as f64;
            acc_pairs += pairs;
        }
        if !state.is_finite() {
            return Err(Error::Diverged {
                epoch,
                step,
                loss: f64::NAN,
            });
        }
        let train_parts = LossParts {
            sentiment: acc.sentiment / train_set.len() as f64,
            inference: if acc_pairs > 0 { acc.inference / acc_pairs as f64 } else { 0.0 },
            distance: if acc_pairs > 0 { acc.distance / acc_pairs as f64 } else { 0.0 },
        };
        let validation = evaluate_loss(&state, val_set, &weights)?;
        let validation_total = validation.total(&weights);
        if !validation_total.is_finite() {
            return Err(Error::Diverged {
                epoch,
                step,
                loss: validation_total,
            });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train: train_parts,
            train_total: train_parts.total(&weights),
            validation,
            validation_total,
        });
        history.stopped_epoch = epoch;
        match stopper.observe(epoch, validation_total) {
            StopDecision::Improved => best = state.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                history.early_stopped = true;
                break;
            }
        }
    }
    history.best_epoch = stopper.best_epoch();
    log::debug!(
        "training stopped at epoch {} (best {} with validation loss {:.6})",
        history.stopped_epoch,
        history.best_epoch,
        stopper.best_loss()
    );
    Ok((best, history))
}
