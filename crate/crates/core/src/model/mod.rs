//! SRIC heads and losses.
//!
//! One shared encoder feeds two linear softmax heads: the sentiment head
//! reads the pooled vector of the whole post, the relation head reads the
//! pooled vector of the `[CLS] t_c [SEP] t_h` pair. A signed cosine
//! distance between separately encoded `t_c` and `t_h` pulls entailment
//! pairs together and pushes contradiction pairs apart.

mod checkpoint;
mod train;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CheckpointMeta, CHECKPOINT_FORMAT_VERSION};
pub use train::{
    batch_objective, evaluate_loss, example_texts, fresh_state, train, AdamW, EarlyStopping, EpochRecord, PairInput,
    StopDecision, TrainConfig, TrainExample, TrainHistory,
};

use crate::corpus::{PairSample, Post, SentimentLabel, NUM_CLASSES};
use crate::encoder::EncoderBackend;
use crate::error::{Error, Result};
use crate::relation::{RelationLabel, NUM_RELATIONS};

/// Weights of the sentiment, inference and distance losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl LossWeights {
    pub const fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    /// Plain sentiment classifier.
    pub const fn sentiment_only() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [self.alpha, self.beta, self.gamma];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("loss weights must be finite and non-negative".into()));
        }
        if ws.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidArgument("at least one loss weight must be positive".into()));
        }
        Ok(())
    }

    /// The `{1..=5}^3` search grid, alpha slowest.
    pub fn grid() -> Vec<LossWeights> {
        let mut out = Vec::with_capacity(125);
        for a in 1..=5 {
            for b in 1..=5 {
                for g in 1..=5 {
                    out.push(LossWeights::new(a as f64, b as f64, g as f64));
                }
            }
        }
        out
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }
}

/// The three loss components of a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub sentiment: f64,
    pub inference: f64,
    pub distance: f64,
}

impl LossParts {
    pub fn total(&self, weights: &LossWeights) -> f64 {
        total_loss(self.sentiment, self.inference, self.distance, weights)
    }
}

/// `alpha * L_sent + beta * L_infer + gamma * L_dist`.
pub fn total_loss(sentiment: f64, inference: f64, distance: f64, weights: &LossWeights) -> f64 {
    weights.alpha * sentiment + weights.beta * inference + weights.gamma * distance
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<B> {
    pub encoder: B,
    /// `M x d`.
    pub sentiment_head: Array2<f64>,
    /// `J x d`.
    pub relation_head: Array2<f64>,
    pub dropout: f64,
}

impl<B: EncoderBackend> ModelState<B> {
    /// Heads start at U(-0.1, 0.1).
    pub fn new(encoder: B, dropout: f64, seed: u64) -> Self {
        let d = encoder.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut head = |rows| Array2::from_shape_fn((rows, d), |_| rng.gen_range(-0.1..0.1));
        let sentiment_head = head(NUM_CLASSES);
        let relation_head = head(NUM_RELATIONS);
        Self {
            encoder,
            sentiment_head,
            relation_head,
            dropout,
        }
    }

    pub fn dim(&self) -> usize {
        self.encoder.dim()
    }

    /// Encoder parameters followed by the sentiment and relation heads.
    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut ps = self.encoder.parameters();
        ps.push(self.sentiment_head.as_slice().expect("standard layout"));
        ps.push(self.relation_head.as_slice().expect("standard layout"));
        ps
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut ps = self.encoder.parameters_mut();
        ps.push(self.sentiment_head.as_slice_mut().expect("standard layout"));
        ps.push(self.relation_head.as_slice_mut().expect("standard layout"));
        ps
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().iter().all(|p| p.iter().all(|x| x.is_finite()))
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFiniteLogits);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

fn head_probs(head: &Array2<f64>, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != head.ncols() {
        return Err(Error::LengthMismatch(z.len(), head.ncols()));
    }
    let logits = head.dot(&ArrayView1::from(z));
    softmax(logits.as_slice().expect("contiguous"))
}

/// `softmax(W^c z^c)`.
pub fn sentiment_probs<B: EncoderBackend>(state: &ModelState<B>, z_c: &[f64]) -> Result<Vec<f64>> {
    head_probs(&state.sentiment_head, z_c)
}

/// `softmax(W^r z^r)`.
pub fn relation_probs<B: EncoderBackend>(state: &ModelState<B>, z_r: &[f64]) -> Result<Vec<f64>> {
    head_probs(&state.relation_head, z_r)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(na > 0.0 && nb > 0.0 && na.is_finite() && nb.is_finite()) {
        return Err(Error::DegenerateEmbedding);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - cos(z, psi)`, in `[0, 2]`.
pub fn cosine_distance(z: &[f64], psi: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(z, psi)?)
}

/// Gradient of `cosine_distance` with respect to both arguments.
pub(crate) fn cosine_distance_grad(z: &[f64], psi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let cos = cosine_similarity(z, psi)?;
    let nz = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    let np = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dz = z
        .iter()
        .zip(psi)
        .map(|(a, b)| -(b / (nz * np) - cos * a / (nz * nz)))
        .collect();
    let dpsi = psi
        .iter()
        .zip(z)
        .map(|(b, a)| -(a / (nz * np) - cos * b / (np * np)))
        .collect();
    Ok((dz, dpsi))
}

/// Mean of `-ln p[target]` over `(probabilities, target)` rows.
pub fn mean_cross_entropy(rows: &[(Vec<f64>, usize)]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let sum: f64 = rows.iter().map(|(p, t)| -p[*t].ln()).sum();
    Ok(sum / rows.len() as f64)
}

/// Mean of `indicator(r) * distance` over `(relation, distance)` rows.
pub fn mean_signed_distance(rows: &[(RelationLabel, f64)]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let sum: f64 = rows.iter().map(|(r, d)| f64::from(r.indicator()) * d).sum();
    Ok(sum / rows.len() as f64)
}

pub fn loss_sentiment<B: EncoderBackend>(
    state: &ModelState<B>,
    batch: &[(&str, SentimentLabel)],
) -> Result<f64> {
    let rows = batch
        .iter()
        .map(|(t, label)| Ok((sentiment_probs(state, &state.encoder.encode(t))?, label.index())))
        .collect::<Result<Vec<_>>>()?;
    mean_cross_entropy(&rows)
}

pub fn loss_inference<B: EncoderBackend>(state: &ModelState<B>, batch: &[PairSample]) -> Result<f64> {
    let rows = batch
        .iter()
        .map(|p| {
            let z_r = state.encoder.encode_pair(&p.t_c, &p.t_h);
            Ok((relation_probs(state, &z_r)?, p.relation.index()))
        })
        .collect::<Result<Vec<_>>>()?;
    mean_cross_entropy(&rows)
}

pub fn loss_distance<B: EncoderBackend>(state: &ModelState<B>, batch: &[PairSample]) -> Result<f64> {
    let rows = batch
        .iter()
        .map(|p| {
            let z = state.encoder.encode(&p.t_c);
            let psi = state.encoder.encode(&p.t_h);
            Ok((p.relation, cosine_distance(&z, &psi)?))
        })
        .collect::<Result<Vec<_>>>()?;
    mean_signed_distance(&rows)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn predict_text<B: EncoderBackend>(state: &ModelState<B>, text: &str) -> Result<SentimentLabel> {
    let probs = sentiment_probs(state, &state.encoder.encode(text))?;
    Ok(SentimentLabel::from_index(argmax(&probs)).expect("three classes"))
}

/// Classify a post from its cleaned text.
pub fn predict<B: EncoderBackend>(state: &ModelState<B>, post: &Post) -> Result<SentimentLabel> {
    predict_text(state, &post.clean_text)
}
