use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LossWeights, ModelState};
use crate::corpus::{HashtagMode, NUM_CLASSES};
use crate::encoder::{BackendSnapshot, EncoderBackend, NamedTensor};
use crate::error::{Error, Result};
use crate::relation::NUM_RELATIONS;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const KIND: &str = "sric";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub config_hash: String,
    /// Hash of the settings that must match for a checkpoint to be reused
    /// (backend, dimension, sequence length, text mode).
    pub compat_hash: String,
    pub text_mode: HashtagMode,
    pub variant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: String,
    pub encoder: BackendSnapshot,
    pub sentiment_head: NamedTensor,
    pub relation_head: NamedTensor,
    pub dropout: f64,
    pub loss_weights: LossWeights,
    pub meta: CheckpointMeta,
}

fn head_tensor(name: &str, head: &Array2<f64>) -> NamedTensor {
    NamedTensor {
        name: name.to_string(),
        shape: head.shape().to_vec(),
        data: head.iter().copied().collect(),
    }
}

fn head_array(t: &NamedTensor, rows: usize, dim: usize) -> Result<Array2<f64>> {
    if t.shape != [rows, dim] || t.data.len() != rows * dim {
        return Err(Error::Checkpoint(format!(
            "tensor {} has shape {:?}, expected [{rows}, {dim}]",
            t.name, t.shape
        )));
    }
    Array2::from_shape_vec((rows, dim), t.data.clone()).map_err(|e| Error::Checkpoint(e.to_string()))
}

impl Checkpoint {
    pub fn from_state<B: EncoderBackend>(
        state: &ModelState<B>,
        loss_weights: LossWeights,
        meta: CheckpointMeta,
    ) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            kind: KIND.to_string(),
            encoder: state.encoder.snapshot(),
            sentiment_head: head_tensor("sentiment_head", &state.sentiment_head),
            relation_head: head_tensor("relation_head", &state.relation_head),
            dropout: state.dropout,
            loss_weights,
            meta,
        }
    }

    pub fn to_state<B: EncoderBackend>(&self) -> Result<ModelState<B>> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        if self.kind != KIND {
            return Err(Error::Checkpoint(format!("unexpected kind {:?}", self.kind)));
        }
        let encoder = B::from_snapshot(&self.encoder)?;
        let d = encoder.dim();
        Ok(ModelState {
            sentiment_head: head_array(&self.sentiment_head, NUM_CLASSES, d)?,
            relation_head: head_array(&self.relation_head, NUM_RELATIONS, d)?,
            encoder,
            dropout: self.dropout,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }

    /// Hex sha256 of a checkpoint file's bytes.
    pub fn file_hash(path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}
