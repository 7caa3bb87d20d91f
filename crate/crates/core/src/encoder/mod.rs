//! Text encoders producing one pooled `[CLS]` vector per input.
//!
//! The trainer only talks to [`EncoderBackend`]; [`ToyEncoder`] is the
//! reference implementation used for desk-scale experiments.

mod toy;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use toy::{ToyEncoder, ToyEncoderConfig, ToyTrace, BACKEND_NAME as TOY_BACKEND};

use crate::error::{Error, Result};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const UNK: &str = "[UNK]";
pub const CLS_ID: u32 = 0;
pub const SEP_ID: u32 = 1;
pub const UNK_ID: u32 = 2;

/// Per-parameter gradient buffers, aligned with `parameters()`.
pub type Gradients = Vec<Vec<f64>>;

pub fn zero_gradients(params: &[&[f64]]) -> Gradients {
    params.iter().map(|p| vec![0.0; p.len()]).collect()
}

/// Whitespace-token vocabulary with the three special tokens at ids 0..3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Sorted unique whitespace tokens of `texts`.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let words: BTreeSet<&str> = texts.into_iter().flat_map(str::split_whitespace).collect();
        let tokens = [CLS, SEP, UNK]
            .into_iter()
            .chain(words.into_iter().filter(|w| ![CLS, SEP, UNK].contains(w)))
            .map(str::to_string)
            .collect();
        Self::from_tokens(tokens).expect("built vocabulary is well formed")
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3 || tokens[0] != CLS || tokens[1] != SEP || tokens[2] != UNK {
            return Err(Error::Checkpoint(
                "vocabulary must start with [CLS], [SEP], [UNK]".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Checkpoint(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// `[CLS] t`, truncated to `max_len` with `[CLS]` always kept.
    pub fn tokenize(&self, text: &str, max_len: usize) -> TokenSequence {
        let max_len = max_len.max(1);
        let mut ids = vec![CLS_ID];
        ids.extend(text.split_whitespace().take(max_len - 1).map(|w| self.id(w)));
        let segments = vec![0; ids.len()];
        TokenSequence {
            ids,
            segments,
            sep_index: None,
        }
    }

    /// `[CLS] first [SEP] second`. Truncation trims `first` before touching
    /// `second`.
    pub fn tokenize_pair(&self, first: &str, second: &str, max_len: usize) -> TokenSequence {
        let max_len = max_len.max(2);
        let second: Vec<u32> = second
            .split_whitespace()
            .take(max_len - 2)
            .map(|w| self.id(w))
            .collect();
        let room = max_len - 2 - second.len();
        let first: Vec<u32> = first.split_whitespace().take(room).map(|w| self.id(w)).collect();
        let sep_index = first.len() + 1;
        let mut ids = Vec::with_capacity(sep_index + 1 + second.len());
        ids.push(CLS_ID);
        ids.extend(first);
        ids.push(SEP_ID);
        ids.extend(second);
        let segments = (0..ids.len()).map(|i| u8::from(i > sep_index)).collect();
        TokenSequence {
            ids,
            segments,
            sep_index: Some(sep_index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// 0 up to and including `[SEP]`, 1 afterwards.
    pub segments: Vec<u8>,
    pub sep_index: Option<usize>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Serializable form of a backend: everything needed to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSnapshot {
    pub backend: String,
    pub dim: usize,
    pub max_len: usize,
    pub vocabulary: Vec<String>,
    pub tensors: Vec<NamedTensor>,
}

/// A differentiable text encoder with a fixed output dimension.
///
/// `forward` must be deterministic for fixed parameters. `backward`
/// accumulates into `grads`, which is aligned with `parameters()`.
pub trait EncoderBackend: Clone + Send + Sync {
    type Trace;

    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn max_len(&self) -> usize;
    fn tokenize(&self, text: &str) -> TokenSequence;
    fn tokenize_pair(&self, first: &str, second: &str) -> TokenSequence;
    fn forward(&self, seq: &TokenSequence) -> (Vec<f64>, Self::Trace);
    fn backward(&self, trace: &Self::Trace, grad_output: &[f64], grads: &mut [Vec<f64>]);
    fn parameters(&self) -> Vec<&[f64]>;
    fn parameters_mut(&mut self) -> Vec<&mut [f64]>;
    fn snapshot(&self) -> BackendSnapshot;
    fn from_snapshot(snapshot: &BackendSnapshot) -> Result<Self>
    where
        Self: Sized;

    /// Whether a single forward pass uses more than one thread.
    fn parallel_forward(&self) -> bool {
        false
    }

    fn encode(&self, text: &str) -> Vec<f64> {
        self.forward(&self.tokenize(text)).0
    }

    fn encode_pair(&self, first: &str, second: &str) -> Vec<f64> {
        self.forward(&self.tokenize_pair(first, second)).0
    }
}

/// Creates fresh backends for a training run.
pub trait BackendBuilder: Sync {
    type Backend: EncoderBackend;

    /// `texts` is every string the run will train on; backends with a
    /// closed vocabulary build it from them.
    fn build(&self, texts: &[&str], seed: u64) -> Self::Backend;
}
