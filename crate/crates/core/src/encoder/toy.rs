//! A one-layer attention encoder small enough to train on a laptop and to
//! check against finite differences.
//!
//! Token, position and segment embeddings are summed. A single-head
//! self-attention layer with a residual connection updates the sequence,
//! and the `[CLS]` position goes through a `tanh` pooler. Only the `[CLS]`
//! query is ever read, so the forward pass is computed for that row alone:
//!
//! ```text
//! x_j  = E[tok_j] + P[j] + S[seg_j]
//! a    = softmax_j( (W_q x_0) · (W_k x_j) / sqrt(d) )
//! h_0  = x_0 + W_v Σ_j a_j x_j
//! out  = tanh(W_p h_0 + b_p)
//! ```

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    BackendBuilder, BackendSnapshot, EncoderBackend, NamedTensor, TokenSequence, Vocabulary,
};
use crate::error::{Error, Result};

pub const BACKEND_NAME: &str = "toy";

const TENSOR_NAMES: [&str; 8] = [
    "token_embeddings",
    "position_embeddings",
    "segment_embeddings",
    "attention_query",
    "attention_key",
    "attention_value",
    "pooler_weight",
    "pooler_bias",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyEncoderConfig {
    pub dim: usize,
    pub max_len: usize,
    /// Half-width of the uniform noise added to identity projections.
    pub init_noise: f64,
}

impl Default for ToyEncoderConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            max_len: 64,
            init_noise: 0.01,
        }
    }
}

impl BackendBuilder for ToyEncoderConfig {
    type Backend = ToyEncoder;

    fn build(&self, texts: &[&str], seed: u64) -> ToyEncoder {
        ToyEncoder::new(Vocabulary::build(texts.iter().copied()), *self, seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    vocab: Vocabulary,
    max_len: usize,
    token_emb: Array2<f64>,
    position_emb: Array2<f64>,
    segment_emb: Array2<f64>,
    w_query: Array2<f64>,
    w_key: Array2<f64>,
    w_value: Array2<f64>,
    w_pool: Array2<f64>,
    b_pool: Array1<f64>,
}

/// Intermediate values of one forward pass, kept for `backward`.
#[derive(Debug, Clone)]
pub struct ToyTrace {
    ids: Vec<u32>,
    segments: Vec<u8>,
    x: Array2<f64>,
    query: Array1<f64>,
    key_query: Array1<f64>,
    attn: Array1<f64>,
    context: Array1<f64>,
    hidden: Array1<f64>,
    output: Array1<f64>,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, half_width: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-half_width..half_width))
}

fn near_identity(rng: &mut ChaCha8Rng, dim: usize, noise: f64) -> Array2<f64> {
    let mut m = Array2::eye(dim);
    if noise > 0.0 {
        m += &uniform(rng, dim, dim, noise);
    }
    m
}

fn add_outer(mut target: ArrayViewMut2<f64>, left: &ArrayView1<f64>, right: &ArrayView1<f64>) {
    for (i, mut row) in target.axis_iter_mut(Axis(0)).enumerate() {
        row.scaled_add(left[i], right);
    }
}

fn view2<'a>(buf: &'a mut [f64], rows: usize, cols: usize) -> ArrayViewMut2<'a, f64> {
    ArrayViewMut2::from_shape((rows, cols), buf).expect("gradient buffer shape")
}

impl ToyEncoder {
    /// Embeddings ~ U(-0.1, 0.1); projections are identity plus
    /// U(-noise, noise); pooler bias starts at zero.
    pub fn new(vocab: Vocabulary, config: ToyEncoderConfig, seed: u64) -> Self {
        assert!(config.dim > 0 && config.max_len >= 2, "invalid toy encoder config");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.dim;
        let token_emb = uniform(&mut rng, vocab.len(), d, 0.1);
        let position_emb = uniform(&mut rng, config.max_len, d, 0.1);
        let segment_emb = uniform(&mut rng, 2, d, 0.1);
        let w_query = near_identity(&mut rng, d, config.init_noise);
        let w_key = near_identity(&mut rng, d, config.init_noise);
        let w_value = near_identity(&mut rng, d, config.init_noise);
        let w_pool = near_identity(&mut rng, d, config.init_noise);
        Self {
            vocab,
            max_len: config.max_len,
            token_emb,
            position_emb,
            segment_emb,
            w_query,
            w_key,
            w_value,
            w_pool,
            b_pool: Array1::zeros(d),
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn token_embeddings(&self) -> ArrayView2<'_, f64> {
        self.token_emb.view()
    }

    pub fn position_embeddings(&self) -> ArrayView2<'_, f64> {
        self.position_emb.view()
    }

    pub fn segment_embeddings(&self) -> ArrayView2<'_, f64> {
        self.segment_emb.view()
    }

    pub fn segment_embeddings_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.segment_emb.view_mut()
    }

    pub fn pooler(&self) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        (self.w_pool.view(), self.b_pool.view())
    }

    /// Overwrite the three attention projections with exact identities.
    pub fn set_identity_attention(&mut self) {
        let d = self.dim();
        self.w_query = Array2::eye(d);
        self.w_key = Array2::eye(d);
        self.w_value = Array2::eye(d);
    }

    fn embed(&self, seq: &TokenSequence) -> Array2<f64> {
        let d = self.dim();
        let mut x = Array2::zeros((seq.len(), d));
        for (j, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
            row.assign(&self.token_emb.row(seq.ids[j] as usize));
            row += &self.position_emb.row(j);
            row += &self.segment_emb.row(seq.segments[j] as usize);
        }
        x
    }
}

impl EncoderBackend for ToyEncoder {
    type Trace = ToyTrace;

    fn name(&self) -> &'static str {
        BACKEND_NAME
    }

    fn dim(&self) -> usize {
        self.b_pool.len()
    }

    fn max_len(&self) -> usize {
        self.max_len
    }

    fn tokenize(&self, text: &str) -> TokenSequence {
        self.vocab.tokenize(text, self.max_len)
    }

    fn tokenize_pair(&self, first: &str, second: &str) -> TokenSequence {
        self.vocab.tokenize_pair(first, second, self.max_len)
    }

    fn forward(&self, seq: &TokenSequence) -> (Vec<f64>, ToyTrace) {
        assert!(!seq.is_empty() && seq.len() <= self.max_len, "sequence length out of range");
        let scale = (self.dim() as f64).sqrt();
        let x = self.embed(seq);
        let x0 = x.row(0);
        let query = self.w_query.dot(&x0);
        let key_query = self.w_key.t().dot(&query);
        let scores = x.dot(&key_query) / scale;
        let max = scores.fold(f64::NEG_INFINITY, |m, &s| m.max(s));
        let mut attn = scores.mapv(|s| (s - max).exp());
        let z = attn.sum();
        attn /= z;
        let context = x.t().dot(&attn);
        let hidden = &x0 + &self.w_value.dot(&context);
        let output = (self.w_pool.dot(&hidden) + &self.b_pool).mapv(f64::tanh);
        let out_vec = output.to_vec();
        let trace = ToyTrace {
            ids: seq.ids.clone(),
            segments: seq.segments.clone(),
            x,
            query,
            key_query,
            attn,
            context,
            hidden,
            output,
        };
        (out_vec, trace)
    }

    fn backward(&self, trace: &ToyTrace, grad_output: &[f64], grads: &mut [Vec<f64>]) {
        let d = self.dim();
        let scale = (d as f64).sqrt();
        let len = trace.ids.len();
        let g = ArrayView1::from(grad_output);
        let du = &g * &trace.output.mapv(|o| 1.0 - o * o);

        add_outer(view2(&mut grads[6], d, d), &du.view(), &trace.hidden.view());
        ArrayViewMut1::from(&mut grads[7][..]).scaled_add(1.0, &du);
        let d_hidden = self.w_pool.t().dot(&du);

        let mut dx = Array2::<f64>::zeros((len, d));
        dx.row_mut(0).scaled_add(1.0, &d_hidden);

        add_outer(view2(&mut grads[5], d, d), &d_hidden.view(), &trace.context.view());
        let d_context = self.w_value.t().dot(&d_hidden);
        let d_attn = trace.x.dot(&d_context);
        for (j, mut row) in dx.axis_iter_mut(Axis(0)).enumerate() {
            row.scaled_add(trace.attn[j], &d_context);
        }

        let mean = trace.attn.dot(&d_attn);
        let d_scores = (&d_attn - mean) * &trace.attn / scale;
        let d_key_query = trace.x.t().dot(&d_scores);
        for (j, mut row) in dx.axis_iter_mut(Axis(0)).enumerate() {
            row.scaled_add(d_scores[j], &trace.key_query);
        }

        add_outer(view2(&mut grads[4], d, d), &trace.query.view(), &d_key_query.view());
        let d_query = self.w_key.dot(&d_key_query);
        add_outer(view2(&mut grads[3], d, d), &d_query.view(), &trace.x.row(0));
        dx.row_mut(0).scaled_add(1.0, &self.w_query.t().dot(&d_query));

        let vocab = self.vocab.len();
        for (j, row) in dx.axis_iter(Axis(0)).enumerate() {
            let tok = trace.ids[j] as usize;
            let seg = trace.segments[j] as usize;
            view2(&mut grads[0], vocab, d).row_mut(tok).scaled_add(1.0, &row);
            view2(&mut grads[1], self.max_len, d).row_mut(j).scaled_add(1.0, &row);
            view2(&mut grads[2], 2, d).row_mut(seg).scaled_add(1.0, &row);
        }
    }

    fn parameters(&self) -> Vec<&[f64]> {
        [
            &self.token_emb,
            &self.position_emb,
            &self.segment_emb,
            &self.w_query,
            &self.w_key,
            &self.w_value,
            &self.w_pool,
        ]
        .into_iter()
        .map(|m| m.as_slice().expect("standard layout"))
        .chain(std::iter::once(self.b_pool.as_slice().expect("standard layout")))
        .collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        [
            &mut self.token_emb,
            &mut self.position_emb,
            &mut self.segment_emb,
            &mut self.w_query,
            &mut self.w_key,
            &mut self.w_value,
            &mut self.w_pool,
        ]
        .into_iter()
        .map(|m| m.as_slice_mut().expect("standard layout"))
        .chain(std::iter::once(
            self.b_pool.as_slice_mut().expect("standard layout"),
        ))
        .collect()
    }

    fn snapshot(&self) -> BackendSnapshot {
        let shapes: [Vec<usize>; 8] = [
            self.token_emb.shape().to_vec(),
            self.position_emb.shape().to_vec(),
            self.segment_emb.shape().to_vec(),
            self.w_query.shape().to_vec(),
            self.w_key.shape().to_vec(),
            self.w_value.shape().to_vec(),
            self.w_pool.shape().to_vec(),
            self.b_pool.shape().to_vec(),
        ];
        let tensors = self
            .parameters()
            .into_iter()
            .zip(shapes)
            .zip(TENSOR_NAMES)
            .map(|((data, shape), name)| NamedTensor {
                name: name.to_string(),
                shape,
                data: data.to_vec(),
            })
            .collect();
        BackendSnapshot {
            backend: BACKEND_NAME.to_string(),
            dim: self.dim(),
            max_len: self.max_len,
            vocabulary: self.vocab.tokens().to_vec(),
            tensors,
        }
    }

    fn from_snapshot(s: &BackendSnapshot) -> Result<Self> {
        if s.backend != BACKEND_NAME {
            return Err(Error::Checkpoint(format!(
                "expected backend {BACKEND_NAME:?}, found {:?}",
                s.backend
            )));
        }
        let vocab = Vocabulary::from_tokens(s.vocabulary.clone())?;
        let (d, v, l) = (s.dim, vocab.len(), s.max_len);
        let expected: [Vec<usize>; 8] = [
            vec![v, d],
            vec![l, d],
            vec![2, d],
            vec![d, d],
            vec![d, d],
            vec![d, d],
            vec![d, d],
            vec![d],
        ];
        if s.tensors.len() != TENSOR_NAMES.len() {
            return Err(Error::Checkpoint("wrong number of tensors".into()));
        }
        for ((t, name), shape) in s.tensors.iter().zip(TENSOR_NAMES).zip(&expected) {
            let numel: usize = shape.iter().product();
            if t.name != name || &t.shape != shape || t.data.len() != numel {
                return Err(Error::Checkpoint(format!("tensor {name} has unexpected layout")));
            }
            if t.data.iter().any(|x| !x.is_finite()) {
                return Err(Error::Checkpoint(format!("tensor {name} is not finite")));
            }
        }
        let m = |i: usize| {
            Array2::from_shape_vec((expected[i][0], expected[i][1]), s.tensors[i].data.clone())
                .expect("shape checked")
        };
        Ok(Self {
            vocab,
            max_len: l,
            token_emb: m(0),
            position_emb: m(1),
            segment_emb: m(2),
            w_query: m(3),
            w_key: m(4),
            w_value: m(5),
            w_pool: m(6),
            b_pool: Array1::from(s.tensors[7].data.clone()),
        })
    }
}
